//! Multiresolution analysis on a static field: transform round trip,
//! threshold-controlled grid adaptation, and the resulting compression for a
//! sequence of thresholds.

use mrlt::mr::{self, ThresholdPolicy};
use mrlt::runner;
use mrlt::state::Slot;

fn main() {
    let (model, _) = mrlt::builtin_problems("burgers2d").unwrap();
    let level = 7u8;

    // exact reconstruction from the full detail pyramid
    let field = mrlt::uniform::init_field(&model, level);
    let (details, root) = mr::mr_transform(&field, &model.ghost);
    let back = mr::inverse_transform(&details, &root, &model.ghost);
    println!(
        "transform round trip on the {0}x{0} initial field: max error {1:.2e}",
        field.side(),
        field.max_abs_diff(&back)
    );

    println!("\n{:>10} {:>8} {:>9} {:>13} {:>12}", "epsilon", "leaves", "virtuals", "compression", "L1 error");
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let mut tree = runner::initial_tree(&model, level, level);
        let policy = ThresholdPolicy::new(eps, model.ncomp);
        mr::adapt_grid(&mut tree, &policy, &model.ghost, 0).expect("adapt");
        let (leaves, virtuals, pct) = tree.leaf_statistics();
        let recon = mr::reconstruct_to_level(&tree, Slot::QN, level, &model.ghost);
        let err = mrlt::diagnostics::l1_error(&recon, &field).unwrap()[0];
        println!("{eps:>10.0e} {leaves:>8} {virtuals:>9} {pct:>12.2}% {err:>12.3e}");
    }
    println!("\nthe L1 error of the thresholded representation tracks epsilon");
}
