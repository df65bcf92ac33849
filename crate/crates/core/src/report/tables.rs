use super::{ReportError, Result, RunSummary};
use crate::attack::{GridCell, SweepGrid, INFEASIBLE_MARK};

/// Corner heading of sweep tables.
pub const SWEEP_CORNER: &str = "Height, Width";
/// Trailing CSV column holding the width of the best cell in its row.
pub const BEST_COLUMN: &str = "best";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn markdown_text(header: &[String], rows: &[Vec<String>]) -> String {
    let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
    let mut out = line(header);
    out.push_str(&line(&vec!["---".to_string(); header.len()]));
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

fn render(header: Vec<String>, rows: Vec<Vec<String>>, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => csv_text(&header, &rows),
        TableFormat::Markdown => markdown_text(&header, &rows),
    }
}

/// Heights down, widths across. CSV flags the best cell through the
/// trailing `best` column; markdown bolds it.
pub fn render_sweep_table(grid: &SweepGrid, format: TableFormat) -> String {
    let mut header = vec![SWEEP_CORNER.to_string()];
    header.extend(grid.widths.iter().map(u32::to_string));
    if format == TableFormat::Csv {
        header.push(BEST_COLUMN.to_string());
    }
    let rows = grid
        .heights
        .iter()
        .zip(&grid.cells)
        .map(|(&h, cells)| {
            let best_w = grid.best.filter(|&(bh, _)| bh == h).map(|(_, bw)| bw);
            let mut row = vec![h.to_string()];
            row.extend(grid.widths.iter().zip(cells).map(|(&w, cell)| {
                let text = cell.render();
                if format == TableFormat::Markdown && best_w == Some(w) {
                    format!("**{text}**")
                } else {
                    text
                }
            }));
            if format == TableFormat::Csv {
                row.push(best_w.map(|w| w.to_string()).unwrap_or_default());
            }
            row
        })
        .collect();
    render(header, rows, format)
}

/// Parses the CSV form of [`render_sweep_table`].
pub fn parse_sweep_csv(text: &str) -> Result<SweepGrid> {
    let bad = |m: String| ReportError::Table(m);
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let n = header.len();
    if n < 2 || header.get(n - 1) != Some(BEST_COLUMN) {
        return Err(bad(format!("expected a trailing {BEST_COLUMN:?} column")));
    }
    let widths = header
        .iter()
        .skip(1)
        .take(n - 2)
        .map(|s| s.trim().parse::<u32>().map_err(|_| bad(format!("bad width heading {s:?}"))))
        .collect::<Result<Vec<_>>>()?;

    let mut heights = Vec::new();
    let mut cells = Vec::new();
    let mut best = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let h: u32 = rec[0].trim().parse().map_err(|_| bad(format!("bad height {:?}", &rec[0])))?;
        let row = (1..n - 1)
            .map(|i| GridCell::parse(&rec[i]).ok_or_else(|| bad(format!("bad cell {:?} in row {h}", &rec[i]))))
            .collect::<Result<Vec<_>>>()?;
        let marker = rec[n - 1].trim();
        if !marker.is_empty() {
            let w: u32 = marker.parse().map_err(|_| bad(format!("bad best marker {marker:?}")))?;
            if !widths.contains(&w) || best.replace((h, w)).is_some() {
                return Err(bad(format!("invalid best marker {marker:?} in row {h}")));
            }
        }
        heights.push(h);
        cells.push(row);
    }
    Ok(SweepGrid {
        heights,
        widths,
        cells,
        best,
    })
}

/// Clean-image predictions, one row per sign.
pub fn render_baseline_table(summary: &RunSummary, format: TableFormat) -> String {
    let header = ["Image", "Predicted Label", "Confidence Score (%)"].map(String::from).to_vec();
    let rows = summary
        .baseline
        .iter()
        .map(|b| vec![b.sign_id.clone(), b.predicted_label.clone(), format!("{:.2}", b.confidence_pct)])
        .collect();
    render(header, rows, format)
}

/// Confidence and predicted-label tables of each pattern's best candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestTables {
    pub confidence: String,
    pub labels: String,
}

/// One row per sign, one column per pattern. Unflipped signs show `×` in
/// the confidence table and their (correct) prediction in the label table.
pub fn render_best_tables(summary: &RunSummary, format: TableFormat) -> BestTables {
    let mut header = vec!["Adversarial Image".to_string()];
    header.extend(summary.patterns.iter().map(|p| p.pattern.display_name()));

    let mut conf_rows = Vec::new();
    let mut label_rows = Vec::new();
    for b in &summary.baseline {
        let mut conf = vec![b.sign_id.clone()];
        let mut label = vec![b.sign_id.clone()];
        for p in &summary.patterns {
            match p.best.per_sign.iter().find(|s| s.sign_id == b.sign_id) {
                Some(s) => {
                    conf.push(if s.flipped {
                        format!("{:.2}", s.confidence_pct)
                    } else {
                        INFEASIBLE_MARK.to_string()
                    });
                    label.push(s.predicted_label.clone());
                }
                None => {
                    conf.push(String::new());
                    label.push(String::new());
                }
            }
        }
        conf_rows.push(conf);
        label_rows.push(label);
    }
    BestTables {
        confidence: render(header.clone(), conf_rows, format),
        labels: render(header, label_rows, format),
    }
}
