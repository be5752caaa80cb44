mod common;

use pdbench::bench::{
    diverging_color, heatmap_svg, parse_report_csv, report_csv, report_markdown, run_suite, BenchConfig, BenchContext,
    Suite,
};
use pdbench::ingest::correlation_matrix;

fn context() -> (BenchConfig, BenchContext) {
    let cfg = BenchConfig::new("unused", "unused");
    let ctx = BenchContext::from_dataset(common::surrogate_dataset(21), &cfg, String::new()).unwrap();
    (cfg, ctx)
}

#[test]
fn heatmap_is_valid_svg_with_one_cell_per_pair() {
    let (_, ctx) = context();
    let corr = correlation_matrix(&ctx.dataset, true).unwrap();
    let svg = heatmap_svg(&corr, Some("seed=42 & more"));
    let doc = roxmltree::Document::parse(&svg).expect("parses as XML");
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    let desc = root.children().find(|n| n.has_tag_name("desc")).unwrap();
    assert_eq!(desc.text(), Some("seed=42 & more"));
    let cells: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("rect") && n.has_attribute("data-row")).collect();
    assert_eq!(cells.len(), 23 * 23);
    for cell in cells {
        let i: usize = cell.attribute("data-row").unwrap().parse().unwrap();
        let j: usize = cell.attribute("data-col").unwrap().parse().unwrap();
        let (r, g, b) = diverging_color(corr.values[[i, j]]);
        assert_eq!(cell.attribute("fill").unwrap(), format!("#{r:02x}{g:02x}{b:02x}"));
    }
}

#[test]
fn diverging_scale_is_monotone_in_each_half() {
    let mut prev = diverging_color(-1.0);
    for k in 1..=100 {
        let c = diverging_color(-1.0 + k as f64 / 100.0);
        assert!(c.0 >= prev.0 && c.1 >= prev.1, "{c:?} after {prev:?}");
        prev = c;
    }
    for k in 1..=100 {
        let c = diverging_color(k as f64 / 100.0);
        assert!(c.1 <= prev.1 && c.2 <= prev.2, "{c:?} after {prev:?}");
        prev = c;
    }
}

#[test]
fn report_tables_round_trip_and_keep_grid_order() {
    let (cfg, ctx) = context();
    let rs = run_suite(&ctx, &cfg, Suite::Gcf).unwrap();
    let csv = report_csv(&rs, true);
    let rows = parse_report_csv(&csv).unwrap();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0].0, "gcF (n_estimators=50, max_depth=None)");
    assert_eq!(rows[8].0, "gcF (n_estimators=200, max_depth=20)");
    for ((config, acc, _, time), cell) in rows.iter().zip(&rs.rows) {
        assert_eq!(config, &cell.config);
        let r = cell.outcome.as_ref().unwrap();
        assert!((acc.unwrap() - r.accuracy()).abs() < 5e-5);
        assert!(time.is_some());
    }
    let untimed = parse_report_csv(&report_csv(&rs, false)).unwrap();
    assert!(untimed.iter().all(|r| r.3.is_none()));
    let md = report_markdown(&rs, false);
    assert!(md.contains("| Accuracy | Precision | Training Time (s) |"), "{md}");
    assert!(md.starts_with("<!--"));
}

#[test]
fn accuracies_are_multiples_of_one_test_row() {
    let (cfg, ctx) = context();
    assert_eq!(ctx.split.test.len(), 39);
    let rs = run_suite(&ctx, &cfg, Suite::Svm).unwrap();
    for r in rs.reports() {
        let scaled = r.accuracy() * 39.0;
        assert!((scaled - scaled.round()).abs() < 1e-9);
    }
}

#[test]
fn every_model_kind_survives_save_and_load() {
    let (_, ctx) = context();
    let dir = tempfile::tempdir().unwrap();
    let results = common::save_load_identical(&ctx, dir.path());
    assert_eq!(results.len(), 5);
    for (kind, same) in results {
        assert!(same, "{kind} changed after reload");
    }
}
