//! Statistical checks of the simulator against hand-derived rates.

mod common;

#[test]
fn first_event_kind_and_holding_time() {
    let rates = common::first_event_rates();
    let total: f64 = rates.iter().sum();
    assert_eq!(total, 22.0);
    let probs: Vec<f64> = rates.iter().map(|r| r / total).collect();
    let (counts, mean) = common::first_event_sample(100_000);
    let pval = common::chi_square_p(&counts, &probs);
    assert!(pval > 1e-3, "counts {counts:?}, p-value {pval}");
    let rel = (mean - 1.0 / total).abs() * total;
    assert!(rel < 0.02, "mean holding time {mean}, relative error {rel}");
}
