use crate::error::{Error, Result};
use crate::state::{self, State};

/// Explicit Runge-Kutta tableau. RK2 is the first two stages of RK3, so both
/// schemes share c and a coefficients.
#[derive(Debug, Clone)]
pub struct ButcherTable {
    pub stages: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ButcherTable {
    pub fn rk2() -> Self {
        ButcherTable {
            stages: 2,
            a: vec![vec![], vec![1.0]],
            b: vec![0.5, 0.5],
            c: vec![0.0, 1.0],
        }
    }

    pub fn rk3() -> Self {
        ButcherTable {
            stages: 3,
            a: vec![vec![], vec![1.0], vec![0.25, 0.25]],
            b: vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
            c: vec![0.0, 1.0, 0.5],
        }
    }

    /// Row sums of a must equal c.
    pub fn validate(&self) -> bool {
        self.a.len() == self.stages
            && self.b.len() == self.stages
            && self.c.len() == self.stages
            && self
                .a
                .iter()
                .zip(self.c.iter())
                .all(|(row, c)| (row.iter().sum::<f64>() - c).abs() < 1e-14)
    }
}

/// Scheme selector: uniform-grid FV, adaptive MR with a global step, and the
/// local time-stepping variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    FvRk2,
    FvRk3,
    MrRk2,
    MrRk3,
    MrltRk2,
    MrltNerk2,
    MrltNerk3,
}

impl SchemeKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "fv-rk2" => SchemeKind::FvRk2,
            "fv-rk3" => SchemeKind::FvRk3,
            "mr-rk2" => SchemeKind::MrRk2,
            "mr-rk3" => SchemeKind::MrRk3,
            "mrlt-rk2" => SchemeKind::MrltRk2,
            "mrlt-nerk2" => SchemeKind::MrltNerk2,
            "mrlt-nerk3" => SchemeKind::MrltNerk3,
            _ => return Err(Error::UnknownScheme(s.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::FvRk2 => "fv-rk2",
            SchemeKind::FvRk3 => "fv-rk3",
            SchemeKind::MrRk2 => "mr-rk2",
            SchemeKind::MrRk3 => "mr-rk3",
            SchemeKind::MrltRk2 => "mrlt-rk2",
            SchemeKind::MrltNerk2 => "mrlt-nerk2",
            SchemeKind::MrltNerk3 => "mrlt-nerk3",
        }
    }

    pub fn is_rk3(&self) -> bool {
        matches!(self, SchemeKind::FvRk3 | SchemeKind::MrRk3 | SchemeKind::MrltNerk3)
    }

    pub fn is_local_time(&self) -> bool {
        matches!(self, SchemeKind::MrltRk2 | SchemeKind::MrltNerk2 | SchemeKind::MrltNerk3)
    }

    pub fn is_adaptive(&self) -> bool {
        !matches!(self, SchemeKind::FvRk2 | SchemeKind::FvRk3)
    }

    /// The uniform-grid FV baseline with the same RK order.
    pub fn fv_baseline(&self) -> SchemeKind {
        if self.is_rk3() {
            SchemeKind::FvRk3
        } else {
            SchemeKind::FvRk2
        }
    }
}

// Compact-form stages. f1 = f(t^n, q^n), f2 = f(t^n + dt, q*),
// f3 = f(t^n + dt/2, q**).

pub fn rk_stage1(q_n: &State, f1: &State, dt: f64) -> State {
    state::lin2(1.0, q_n, dt, f1)
}

pub fn rk2_stage2(q_n: &State, q_star: &State, f2: &State, dt: f64) -> State {
    state::lin3(0.5, q_n, 0.5, q_star, 0.5 * dt, f2)
}

pub fn rk3_stage2(q_n: &State, q_star: &State, f2: &State, dt: f64) -> State {
    state::lin3(0.75, q_n, 0.25, q_star, 0.25 * dt, f2)
}

pub fn rk3_stage3(q_n: &State, q_dstar: &State, f3: &State, dt: f64) -> State {
    state::lin3(1.0 / 3.0, q_n, 2.0 / 3.0, q_dstar, 2.0 / 3.0 * dt, f3)
}

/// NERK weight polynomials for the two-stage method:
/// beta1 = theta - theta^2/2, beta2 = theta^2/2.
pub fn nerk_beta(theta: f64) -> Result<(f64, f64)> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Constraint {
            key: "theta".into(),
            msg: format!("must lie in (0, 1], got {theta}"),
        });
    }
    Ok((-0.5 * theta * theta + theta, 0.5 * theta * theta))
}

/// Dense output of the two-stage scheme at t^n + theta dt, computed in the
/// two sub-steps of the compact layout (q*_theta, then q_theta).
pub fn nerk2_value(q_n: &State, f1: &State, f2: &State, dt: f64, theta: f64) -> Result<State> {
    let (b1, b2) = nerk_beta(theta)?;
    let q_star_theta = state::lin2(1.0, q_n, b1 * dt, f1);
    Ok(state::lin2(1.0, &q_star_theta, b2 * dt, f2))
}

/// First NERK sub-step only (uses f1); the second sub-step adds b2*dt*f2.
pub fn nerk2_first_substep(q_n: &State, f1: &State, dt: f64, theta: f64) -> State {
    let (b1, _) = nerk_beta(theta).expect("theta fixed by scheme");
    state::lin2(1.0, q_n, b1 * dt, f1)
}

pub fn nerk2_second_substep(q_star_theta: &mut State, f2: &State, dt: f64, theta: f64) {
    let (_, b2) = nerk_beta(theta).expect("theta fixed by scheme");
    state::axpy(q_star_theta, b2 * dt, f2);
}

/// CFL-limited step at the finest level: sigma dx_L / max wave speed, and for
/// diffusive models also sigma dx_L^2 / (2 d nu). `fallback` is the user dt
/// override, used when both limits degenerate.
pub fn cfl_timestep(
    max_wave_speed: f64,
    nu: f64,
    dx_finest: f64,
    dim: usize,
    sigma: f64,
    fallback: Option<f64>,
) -> Result<f64> {
    let mut dt = f64::INFINITY;
    if max_wave_speed > 0.0 {
        dt = dt.min(sigma * dx_finest / max_wave_speed);
    }
    if nu > 0.0 {
        dt = dt.min(sigma * dx_finest * dx_finest / (2.0 * dim as f64 * nu));
    }
    if dt.is_finite() {
        Ok(dt)
    } else {
        fallback.ok_or(Error::CflDegenerate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use smallvec::smallvec;

    fn s(v: f64) -> State {
        smallvec![v]
    }

    #[test]
    fn tables_validate() {
        assert!(ButcherTable::rk2().validate());
        assert!(ButcherTable::rk3().validate());
        let t = ButcherTable::rk2();
        assert_eq!(t.c[1], 1.0);
        assert_eq!(t.a[1][0], 1.0);
        assert_eq!(t.b, vec![0.5, 0.5]);
    }

    #[test]
    fn stage_arithmetic() {
        assert_eq!(rk_stage1(&s(1.0), &s(0.0), 0.3)[0], 1.0);
        assert!((rk_stage1(&s(2.0), &s(3.0), 0.1)[0] - 2.3).abs() < 1e-15);
        assert!((rk2_stage2(&s(0.0), &s(1.0), &s(1.0), 1.0)[0] - 1.0).abs() < 1e-15);
        assert!((rk3_stage2(&s(0.0), &s(1.0), &s(1.0), 1.0)[0] - 0.5).abs() < 1e-15);
        // steady state fixed points
        assert_eq!(rk2_stage2(&s(4.0), &s(4.0), &s(0.0), 0.5)[0], 4.0);
        assert_eq!(rk3_stage3(&s(4.0), &s(4.0), &s(0.0), 0.5)[0], 4.0);
    }

    #[test]
    fn linear_test_amplification() {
        // f = z q with dt = 1: compose stages and compare with the truncated
        // exponential polynomials.
        let z = -0.37f64;
        let q0 = s(1.0);
        let f1 = s(z * q0[0]);
        let qs = rk_stage1(&q0, &f1, 1.0);
        assert!((qs[0] - (1.0 + z)).abs() < 1e-15);
        let f2 = s(z * qs[0]);
        let q1 = rk2_stage2(&q0, &qs, &f2, 1.0);
        assert!((q1[0] - (1.0 + z + 0.5 * z * z)).abs() < 1e-15);
        let qss = rk3_stage2(&q0, &qs, &f2, 1.0);
        assert!((qss[0] - (1.0 + 0.5 * z + 0.25 * z * z)).abs() < 1e-15);
        let f3 = s(z * qss[0]);
        let q1 = rk3_stage3(&q0, &qss, &f3, 1.0);
        assert!((q1[0] - (1.0 + z + z * z / 2.0 + z * z * z / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn beta_values() {
        assert_eq!(nerk_beta(1.0).unwrap(), (0.5, 0.5));
        assert_eq!(nerk_beta(0.5).unwrap(), (3.0 / 8.0, 1.0 / 8.0));
        assert_eq!(nerk_beta(0.25).unwrap(), (7.0 / 32.0, 1.0 / 32.0));
        assert_eq!(nerk_beta(0.75).unwrap(), (15.0 / 32.0, 9.0 / 32.0));
        assert!(nerk_beta(0.0).is_err());
        assert!(nerk_beta(1.5).is_err());
    }

    #[test]
    fn beta_sum_consistency() {
        for k in 1..=100 {
            let theta = k as f64 / 100.0;
            let (b1, b2) = nerk_beta(theta).unwrap();
            assert!((b1 + b2 - theta).abs() < 1e-15);
        }
    }

    #[test]
    fn nerk_endpoint_matches_rk2() {
        let q0 = s(0.7);
        let f1 = s(-0.3);
        let dt = 0.2;
        let qs = rk_stage1(&q0, &f1, dt);
        let f2 = s(0.11);
        let via_stage = rk2_stage2(&q0, &qs, &f2, dt);
        let via_nerk = nerk2_value(&q0, &f1, &f2, dt, 1.0).unwrap();
        // bit-for-bit at theta = 1
        assert_eq!(via_stage[0].to_bits(), via_nerk[0].to_bits());
    }

    #[test]
    fn nerk_midpoint_linear_test() {
        let z = 0.23f64;
        let q0 = s(1.0);
        let f1 = s(z);
        let f2 = s(z * (1.0 + z));
        let v = nerk2_value(&q0, &f1, &f2, 1.0, 0.5).unwrap();
        assert!((v[0] - (1.0 + 0.5 * z + 0.125 * z * z)).abs() < 1e-15);
        let c = nerk2_value(&s(2.0), &s(0.0), &s(0.0), 1.0, 0.3).unwrap();
        assert_eq!(c[0], 2.0);
    }

    #[test]
    fn cfl_examples() {
        let dt = cfl_timestep(1.0, 0.0, 1.0 / 512.0, 1, 0.5, None).unwrap();
        assert!((dt - 0.5 / 512.0).abs() < 1e-15);
        // zero-velocity Euler state: speed = sound speed c
        let c = 1.1832159566199232; // sqrt(1.4) for rho=1, p=1
        let dt = cfl_timestep(c, 0.0, 1.0 / 256.0, 2, 0.5, None).unwrap();
        assert!((dt - 0.5 / 256.0 / c).abs() < 1e-15);
        // pure diffusion
        let dt = cfl_timestep(0.0, 1.0, 1.0 / 8.0, 1, 0.5, None).unwrap();
        assert!((dt - 0.5 * (1.0 / 64.0) / 2.0).abs() < 1e-18);
        // degenerate
        assert!(cfl_timestep(0.0, 0.0, 0.1, 1, 0.5, None).is_err());
        assert_eq!(cfl_timestep(0.0, 0.0, 0.1, 1, 0.5, Some(1e-3)).unwrap(), 1e-3);
    }
}
