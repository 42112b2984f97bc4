//! Two-dimensional inviscid Burgers with the adaptive local time-stepping
//! scheme: sin(2 pi x) sin(2 pi y) initial data steepening into shocks.
//! Writes snapshots, the final adaptive grid and a metrics file to
//! ./out_burgers2d.

use mrlt::runner::{run, RunConfig};
use mrlt::SchemeKind;

fn main() {
    let mut cfg = RunConfig::new("burgers2d", SchemeKind::MrltNerk2);
    cfg.max_level = Some(7);
    cfg.out_dir = Some("out_burgers2d".into());
    cfg.snapshot_every = Some(50);
    let metrics = run(&cfg).expect("run");
    println!(
        "cycles={} wall={:.2}s compression mean {:.1}% final {:.1}%",
        metrics.cycles,
        metrics.wall_seconds,
        metrics.compression_mean(),
        metrics.compression_final()
    );
    println!("snapshots and grid dump in ./out_burgers2d");
}
