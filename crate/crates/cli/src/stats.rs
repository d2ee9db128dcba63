//! `ribbons stats` rendering.

use std::collections::BTreeMap;

use anyhow::Result;
use ribbons_core::analytics::boundaries::{boundary_explanations, classify_heuristic, distribution, BoundaryClass};
use ribbons_core::analytics::{quote_accuracy, scene_length_stats, story_stats, Accuracy, SceneLengthStats, StoryStats};
use ribbons_core::store::StoryStore;
use serde::Serialize;

use crate::Format;

#[derive(Serialize)]
struct Report {
    #[serde(flatten)]
    stats: StoryStats,
    quotes_checked: usize,
    quotes_replaced: usize,
    /// `null` when no quote was checked.
    quote_accuracy: Option<f64>,
    scene_lengths: Option<SceneLengthStats>,
    /// Heuristic labels only; unplaced explanations count as `other`.
    boundaries: BTreeMap<&'static str, f64>,
}

fn report(store: &StoryStore, id: &str) -> Result<Report> {
    let story = store.read_story(id)?;
    let labels: Vec<BoundaryClass> = boundary_explanations(&story)
        .iter()
        .map(|e| classify_heuristic(e).unwrap_or(BoundaryClass::Other))
        .collect();
    let log = &story.pipeline_log;
    Ok(Report {
        stats: story_stats(&story),
        quotes_checked: log.quotes_checked,
        quotes_replaced: log.quotes_replaced,
        quote_accuracy: quote_accuracy(log.quotes_checked, log.quotes_replaced),
        scene_lengths: scene_length_stats(&story),
        boundaries: distribution(&labels).into_iter().map(|(c, p)| (c.as_str(), p)).collect(),
    })
}

fn table(reports: &[Report]) -> String {
    let mut rows: Vec<Vec<String>> = vec![StoryStats::HEADERS.iter().map(|h| h.to_string()).collect()];
    rows.extend(reports.iter().map(|r| r.stats.row().to_vec()));
    let widths: Vec<usize> = (0..StoryStats::HEADERS.len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, w))| if c == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    for r in reports {
        out.push('\n');
        out.push_str(&format!("[{}]\n", r.stats.id));
        out.push_str(&format!(
            "quote_accuracy: {} (checked {}, replaced {})\n",
            Accuracy(r.quote_accuracy),
            r.quotes_checked,
            r.quotes_replaced
        ));
        if let Some(s) = &r.scene_lengths {
            let bins: Vec<String> = s.histogram.iter().map(|(b, n)| format!("{b}:{n}")).collect();
            out.push_str(&format!(
                "scene_lines: mean {:.1} min {} max {} histogram {}\n",
                s.mean,
                s.min,
                s.max,
                bins.join(" ")
            ));
        }
        if !r.boundaries.is_empty() {
            let parts: Vec<String> = r.boundaries.iter().map(|(c, p)| format!("{c} {p:.4}")).collect();
            out.push_str(&format!("boundaries: {}\n", parts.join(", ")));
        }
    }
    out
}

fn csv(reports: &[Report]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = vec!["id"];
    header.extend(StoryStats::HEADERS);
    header.push("quote_accuracy");
    w.write_record(&header)?;
    for r in reports {
        let mut rec = vec![r.stats.id.clone()];
        rec.extend(r.stats.row());
        rec.push(Accuracy(r.quote_accuracy).to_string());
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn print(store: &StoryStore, ids: &[String], format: Format) -> Result<()> {
    let reports = ids.iter().map(|id| report(store, id)).collect::<Result<Vec<_>>>()?;
    let out = match format {
        Format::Table => table(&reports),
        Format::Json => serde_json::to_string_pretty(&reports)? + "\n",
        Format::Csv => csv(&reports)?,
    };
    print!("{out}");
    Ok(())
}
