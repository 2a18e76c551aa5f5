//! Fixed-width text rendering of channel tables, in the style used for the
//! worked examples: rows are channels, columns are slots, idle cells show a
//! white square.

use crate::error::Result;
use crate::model::{source_label, HomogeneousSchedule};
use crate::sim::channel_window;

const IDLE: &str = "\u{25A1}";

/// Renders the first-fit channel table over `slots` slots. Empty schedules
/// render as an empty string.
pub fn render_table(s: &HomogeneousSchedule, slots: u64) -> Result<String> {
    let window = channel_window(s, slots)?;
    let table = window.channels.as_ref().expect("channel_window assigns channels");
    let rows = table.first().map_or(0, |cells| cells.len());
    if rows == 0 {
        return Ok(String::new());
    }
    let labels: Vec<Vec<String>> = (0..rows)
        .map(|k| {
            (0..slots as usize)
                .map(|t| table[t][k].map_or(IDLE.to_string(), source_label))
                .collect()
        })
        .collect();
    let mut width = 1;
    for t in 1..=slots {
        width = width.max(t.to_string().len());
    }
    for row in &labels {
        for cell in row {
            width = width.max(cell.chars().count());
        }
    }
    let head = "time slot";
    let mut left_width = head.len();
    for k in 1..=rows {
        left_width = left_width.max(format!("channel {k}").len());
    }

    let mut out = String::new();
    out.push_str(&format!("{head:<left_width$}"));
    for t in 1..=slots {
        out.push_str(&format!(" {:>width$}", t));
    }
    out.push('\n');
    for (k, row) in labels.iter().enumerate() {
        out.push_str(&format!("{:<left_width$}", format!("channel {}", k + 1)));
        for cell in row {
            let pad = width - cell.chars().count();
            out.push_str(&format!(" {}{cell}", " ".repeat(pad)));
        }
        out.push('\n');
    }
    Ok(out)
}
