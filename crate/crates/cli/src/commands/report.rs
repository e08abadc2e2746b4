use anyhow::Result;
use osv_core::eval::{parse_csv, render_summary_table, summarize_rows};
use osv_core::fsutil;

use super::require_file;
use crate::args::ReportArgs;

pub fn run(a: &ReportArgs) -> Result<()> {
    require_file(&a.csv, "report")?;
    let rows = parse_csv(&fsutil::read_string(&a.csv)?)?;
    let table = render_summary_table(&summarize_rows(&rows)?);
    match &a.out {
        Some(path) => fsutil::write_atomic(path, table.as_bytes())?,
        None => print!("{table}"),
    }
    Ok(())
}
