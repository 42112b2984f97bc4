//! Compressible Euler equations on the four-quadrant Riemann configuration
//! (Lax-Liu #6) with the AUSM+ flux and adaptive local time-stepping.
//! Optionally compares against a finer uniform FV/RK3 reference.

use mrlt::runner::{run, RunConfig};
use mrlt::SchemeKind;

fn main() {
    let with_reference = std::env::args().any(|a| a == "--reference");
    let mut cfg = RunConfig::new("euler2d", SchemeKind::MrltNerk3);
    cfg.max_level = Some(7);
    cfg.out_dir = Some("out_euler2d".into());
    cfg.snapshot_every = Some(60);
    if with_reference {
        cfg.reference_level = Some(8); // computed once, cached under the out dir
    }
    let metrics = run(&cfg).expect("run");
    println!(
        "cycles={} wall={:.2}s min rho={:.4} compression mean {:.1}%",
        metrics.cycles,
        metrics.wall_seconds,
        metrics.min_comp0,
        metrics.compression_mean()
    );
    if let Some(e) = &metrics.e_l1 {
        println!(
            "L1 errors vs FV/RK3 reference: rho={:.3e} mx={:.3e} my={:.3e} E={:.3e}",
            e[0], e[1], e[2], e[3]
        );
    }
    println!("snapshot columns: level i j x y dx dy rho rho*vx rho*vy E");
}
