//! One-dimensional reaction-diffusion flame front: dimensionless temperature
//! with Arrhenius-type chemistry, diffusion and the self-consistent flame
//! velocity v_f = integral of the reaction rate. The front propagates to the
//! right while the adaptive grid follows it.

use mrlt::runner::{run, RunConfig};
use mrlt::SchemeKind;

fn main() {
    let mut cfg = RunConfig::new("flame1d", SchemeKind::MrltNerk2);
    cfg.max_level = Some(9);
    cfg.t_end = Some(2.0);
    cfg.out_dir = Some("out_flame1d".into());
    cfg.snapshot_every = Some(500);
    let metrics = run(&cfg).expect("run");
    println!(
        "cycles={} wall={:.2}s T in [{:.4}, {:.4}] compression mean {:.2}%",
        metrics.cycles,
        metrics.wall_seconds,
        metrics.min_comp0,
        metrics.max_comp0,
        metrics.compression_mean()
    );
    println!("snapshots in ./out_flame1d (columns: level i x dx T)");
}
