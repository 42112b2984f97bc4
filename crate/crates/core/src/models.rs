use smallvec::smallvec;

use crate::error::{Error, Result};
use crate::mr::{GhostBc, GhostSpec};
use crate::state::{self, State};
use crate::tree::{GradedTree, NodeKind, MAX_DIM};

/// Parameters of the one-dimensional flame model.
#[derive(Debug, Clone, Copy)]
pub struct FlameParams {
    /// Zeldovich number (dimensionless activation energy), > 0.
    pub ze: f64,
    /// Burnt-unburnt temperature ratio, in (0, 1).
    pub tau: f64,
}

impl FlameParams {
    pub fn new(ze: f64, tau: f64) -> Self {
        assert!(ze > 0.0 && tau > 0.0 && tau < 1.0);
        FlameParams { ze, tau }
    }
}

/// Chemical reaction rate omega(T) = Ze^2/2 (1-T) exp(Ze(1-T)/(tau(1-T)-1)).
pub fn flame_reaction_rate(t: f64, p: &FlameParams) -> f64 {
    let u = 1.0 - t;
    0.5 * p.ze * p.ze * u * (p.ze * u / (p.tau * u - 1.0)).exp()
}

/// Primitive view of a 2-D Euler state.
#[derive(Debug, Clone, Copy)]
pub struct EulerState {
    pub rho: f64,
    pub vx: f64,
    pub vy: f64,
    pub p: f64,
}

impl EulerState {
    /// From conserved variables (rho, rho vx, rho vy, E) with p = (gamma-1)(E - rho |v|^2/2).
    pub fn from_conserved(q: &State, gamma: f64) -> Result<Self> {
        let rho = q[0];
        if rho <= 0.0 || !rho.is_finite() {
            return Err(Error::InadmissibleState { rho, p: f64::NAN });
        }
        let vx = q[1] / rho;
        let vy = q[2] / rho;
        let p = euler_pressure(q, gamma)?;
        Ok(EulerState { rho, vx, vy, p })
    }

    pub fn to_conserved(&self, gamma: f64) -> State {
        let e = self.p / (gamma - 1.0) + 0.5 * self.rho * (self.vx * self.vx + self.vy * self.vy);
        smallvec![self.rho, self.rho * self.vx, self.rho * self.vy, e]
    }

    pub fn sound_speed(&self, gamma: f64) -> f64 {
        (gamma * self.p / self.rho).sqrt()
    }
}

/// p = (gamma-1)(E - rho |v|^2 / 2) under the Ma = 1 nondimensionalization.
pub fn euler_pressure(q: &State, gamma: f64) -> Result<f64> {
    let rho = q[0];
    if rho <= 0.0 || !rho.is_finite() {
        return Err(Error::InadmissibleState { rho, p: f64::NAN });
    }
    let ke = 0.5 * (q[1] * q[1] + q[2] * q[2]) / rho;
    let p = (gamma - 1.0) * (q[3] - ke);
    if p <= 0.0 || !p.is_finite() {
        return Err(Error::InadmissibleState { rho, p });
    }
    Ok(p)
}

/// Averaged interface flux: (f(qL) + f(qR)) / 2.
pub fn centered_flux(q_l: &State, q_r: &State, phys: impl Fn(&State) -> State) -> State {
    let fl = phys(q_l);
    let fr = phys(q_r);
    state::lin2(0.5, &fl, 0.5, &fr)
}

/// Exact (Godunov) upwind flux for the scalar Burgers flux f(q) = q^2/2.
pub fn burgers_upwind_flux(q_l: f64, q_r: f64) -> f64 {
    let f = |q: f64| 0.5 * q * q;
    if q_l > q_r {
        // shock moving with speed (qL + qR)/2
        if q_l + q_r > 0.0 {
            f(q_l)
        } else {
            f(q_r)
        }
    } else if q_l >= 0.0 {
        f(q_l)
    } else if q_r <= 0.0 {
        f(q_r)
    } else {
        0.0 // transonic rarefaction: sonic point flux f(0)
    }
}

/// Central-difference diffusive contribution to an interface flux.
pub fn diffusive_flux(q_l: &State, q_r: &State, dx: f64, nu: f64) -> State {
    debug_assert!(dx > 0.0);
    state::lin2(nu / dx, q_l, -nu / dx, q_r)
}

/// Fused MacCormack increment for the advective term v_f dT/dx on a 3-point
/// stencil: forward predictor then backward corrector, second order in space,
/// exact on linear profiles.
pub fn maccormack_advective_update(stencil: &[f64; 3], v_f: f64, dx: f64, dt: f64) -> f64 {
    let c = v_f * dt / dx;
    -0.5 * c * (stencil[2] - stencil[0]) + 0.5 * c * c * (stencil[2] - 2.0 * stencil[1] + stencil[0])
}

// AUSM+ splitting (Liou 1996) ------------------------------------------------

fn ausm_mach_plus(m: f64) -> f64 {
    if m.abs() >= 1.0 {
        0.5 * (m + m.abs())
    } else {
        let s = m * m - 1.0;
        0.25 * (m + 1.0) * (m + 1.0) + 0.125 * s * s
    }
}

fn ausm_mach_minus(m: f64) -> f64 {
    if m.abs() >= 1.0 {
        0.5 * (m - m.abs())
    } else {
        let s = m * m - 1.0;
        -0.25 * (m - 1.0) * (m - 1.0) - 0.125 * s * s
    }
}

fn ausm_pressure_plus(m: f64) -> f64 {
    if m.abs() >= 1.0 {
        0.5 * (1.0 + m.signum())
    } else {
        let s = m * m - 1.0;
        0.25 * (m + 1.0) * (m + 1.0) * (2.0 - m) + 0.1875 * m * s * s
    }
}

fn ausm_pressure_minus(m: f64) -> f64 {
    if m.abs() >= 1.0 {
        0.5 * (1.0 - m.signum())
    } else {
        let s = m * m - 1.0;
        0.25 * (m - 1.0) * (m - 1.0) * (2.0 + m) - 0.1875 * m * s * s
    }
}

/// AUSM+ interface flux for the 2-D Euler equations along `axis`.
/// Interface Mach number from degree-4 split polynomials, interface pressure
/// from degree-5 splits, convective vector upwinded by the mass flux sign.
pub fn ausm_plus_flux(left: &State, right: &State, axis: usize, gamma: f64) -> Result<State> {
    let l = EulerState::from_conserved(left, gamma)?;
    let r = EulerState::from_conserved(right, gamma)?;
    let (ul, ur) = if axis == 0 { (l.vx, r.vx) } else { (l.vy, r.vy) };

    // Common interface speed of sound via the critical speed a* (Liou 1996).
    let h_l = (left[3] + l.p) / l.rho;
    let h_r = (right[3] + r.p) / r.rho;
    let crit = 2.0 * (gamma - 1.0) / (gamma + 1.0);
    let a_star_l = (crit * h_l).sqrt();
    let a_star_r = (crit * h_r).sqrt();
    let a_tilde_l = a_star_l * a_star_l / a_star_l.max(ul.abs());
    let a_tilde_r = a_star_r * a_star_r / a_star_r.max(ur.abs());
    let a_half = a_tilde_l.min(a_tilde_r);

    let m_l = ul / a_half;
    let m_r = ur / a_half;
    let m_half = ausm_mach_plus(m_l) + ausm_mach_minus(m_r);
    let p_half = ausm_pressure_plus(m_l) * l.p + ausm_pressure_minus(m_r) * r.p;

    let (rho_up, u_up, v_up, h_up) = if m_half > 0.0 {
        (l.rho, l.vx, l.vy, h_l)
    } else {
        (r.rho, r.vx, r.vy, h_r)
    };
    let mdot = a_half * m_half * rho_up;

    let mut f: State = smallvec![mdot, mdot * u_up, mdot * v_up, mdot * h_up];
    f[1 + axis] += p_half;
    Ok(f)
}

/// Interface flux oriented so that `own` sits on the `-side` of the face:
/// advective numerical flux plus the central diffusive part.
pub fn face_flux(
    model: &ModelSpec,
    axis: usize,
    side: i32,
    own: &State,
    partner: &State,
    dx: f64,
    stage: usize,
) -> Result<State> {
    let (ql, qr) = if side < 0 { (partner, own) } else { (own, partner) };
    let mut f = model.num_flux(axis, ql, qr, stage)?;
    if model.nu > 0.0 {
        state::axpy(&mut f, 1.0, &diffusive_flux(ql, qr, dx, model.nu));
    }
    Ok(f)
}

// Model definitions -----------------------------------------------------------

#[derive(Debug, Clone)]
pub enum ModelKind {
    /// 1-D linear advection with a centered flux (convergence study).
    Advection1d { speed: f64 },
    /// 1-D inviscid Burgers with the Godunov flux (conservation checks).
    Burgers1d,
    /// 2-D inviscid Burgers with the Godunov flux per axis.
    Burgers2d,
    /// 1-D reaction-diffusion flame; v_f is frozen per coarse cycle.
    Flame1d { params: FlameParams, v_f: f64 },
    /// 2-D compressible Euler with the AUSM+ flux.
    Euler2d { gamma: f64 },
    /// Diagnostic linear model dq/dt = lambda q where each flux evaluation
    /// reads the interface partner supplied by the synchronization machinery.
    LinearProbe { lambda: f64 },
}

/// A PDE definition: flux, source, wave-speed bound, boundary conditions and
/// initial condition, plus the paper's parameter set for the named problems.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    pub dim: usize,
    pub ncomp: usize,
    pub nu: f64,
    pub lo: [f64; MAX_DIM],
    pub hi: [f64; MAX_DIM],
    pub ghost: GhostSpec,
}

impl ModelSpec {
    pub fn periodic_flags(&self) -> [bool; MAX_DIM] {
        self.ghost.periodic_flags()
    }

    pub fn probe_lambda(&self) -> Option<f64> {
        match self.kind {
            ModelKind::LinearProbe { lambda } => Some(lambda),
            _ => None,
        }
    }

    /// Physical advective flux along `axis`.
    pub fn physical_flux(&self, axis: usize, q: &State) -> State {
        match &self.kind {
            ModelKind::Advection1d { speed } => smallvec![speed * q[0]],
            ModelKind::Burgers1d | ModelKind::Burgers2d => smallvec![0.5 * q[0] * q[0]],
            ModelKind::Flame1d { v_f, .. } => smallvec![v_f * q[0]],
            ModelKind::Euler2d { gamma } => {
                let s = EulerState::from_conserved(q, *gamma).expect("admissible state");
                let u = if axis == 0 { s.vx } else { s.vy };
                let mut f: State =
                    smallvec![s.rho * u, q[1] * u, q[2] * u, (q[3] + s.p) * u];
                f[1 + axis] += s.p;
                f
            }
            ModelKind::LinearProbe { .. } => state::zeros(self.ncomp),
        }
    }

    /// Advective interface flux along `axis`; `stage` selects the MacCormack
    /// one-sided direction (1 = downwind predictor, 2 = upwind corrector,
    /// 3 = centered).
    pub fn num_flux(&self, axis: usize, q_l: &State, q_r: &State, stage: usize) -> Result<State> {
        match &self.kind {
            ModelKind::Advection1d { .. } => {
                Ok(centered_flux(q_l, q_r, |q| self.physical_flux(axis, q)))
            }
            ModelKind::Burgers1d | ModelKind::Burgers2d => {
                Ok(smallvec![burgers_upwind_flux(q_l[0], q_r[0])])
            }
            ModelKind::Flame1d { v_f, .. } => {
                let t = match stage {
                    1 => q_r[0],
                    2 => q_l[0],
                    _ => 0.5 * (q_l[0] + q_r[0]),
                };
                Ok(smallvec![v_f * t])
            }
            ModelKind::Euler2d { gamma } => ausm_plus_flux(q_l, q_r, axis, *gamma),
            ModelKind::LinearProbe { .. } => Ok(state::zeros(self.ncomp)),
        }
    }

    pub fn source(&self, q: &State) -> Option<State> {
        match &self.kind {
            ModelKind::Flame1d { params, .. } => {
                Some(smallvec![flame_reaction_rate(q[0], params)])
            }
            _ => None,
        }
    }

    /// Per-axis wave-speed bound (maximum over axes).
    pub fn wave_speed(&self, q: &State) -> f64 {
        match &self.kind {
            ModelKind::Advection1d { speed } => speed.abs(),
            ModelKind::Burgers1d | ModelKind::Burgers2d => q[0].abs(),
            ModelKind::Flame1d { v_f, .. } => v_f.abs(),
            ModelKind::Euler2d { gamma } => match EulerState::from_conserved(q, *gamma) {
                Ok(s) => s.vx.abs().max(s.vy.abs()) + s.sound_speed(*gamma),
                Err(_) => f64::INFINITY,
            },
            ModelKind::LinearProbe { .. } => 0.0,
        }
    }

    pub fn initial_condition(&self, x: &[f64]) -> State {
        match &self.kind {
            ModelKind::Advection1d { .. } => {
                smallvec![(-100.0 * (x[0] - 0.25) * (x[0] - 0.25)).exp()]
            }
            ModelKind::Burgers1d => {
                smallvec![0.5 + (2.0 * std::f64::consts::PI * x[0]).sin()]
            }
            ModelKind::Burgers2d => {
                let pi = std::f64::consts::PI;
                smallvec![(2.0 * pi * x[0]).sin() * (2.0 * pi * x[1]).sin()]
            }
            ModelKind::Flame1d { .. } => {
                smallvec![if x[0] <= 1.0 { 1.0 } else { (1.0 - x[0]).exp() }]
            }
            ModelKind::Euler2d { gamma } => {
                let q = |rho: f64, vx: f64, vy: f64| EulerState { rho, vx, vy, p: 1.0 }
                    .to_conserved(*gamma);
                let east = x[0] >= 0.5;
                let north = x[1] >= 0.5;
                match (east, north) {
                    (true, true) => q(1.0, 0.75, -0.5),   // 1st quadrant
                    (false, true) => q(2.0, 0.75, 0.5),   // 2nd
                    (false, false) => q(1.0, -0.75, 0.5), // 3rd
                    (true, false) => q(3.0, -0.75, -0.5), // 4th
                }
            }
            ModelKind::LinearProbe { .. } => smallvec![1.0],
        }
    }

    /// Quadrature of the reaction rate over the adaptive grid:
    /// v_f = sum over leaves of omega(T_i) dx_i.
    pub fn flame_velocity_on_tree(&self, tree: &GradedTree) -> f64 {
        let params = match &self.kind {
            ModelKind::Flame1d { params, .. } => *params,
            _ => return 0.0,
        };
        let mut leaves = tree.all_leaves();
        leaves.sort_unstable();
        let mut sum = 0.0;
        for idx in leaves {
            let rec = tree.record(idx);
            if rec.kind == NodeKind::Leaf {
                sum += flame_reaction_rate(rec.q_n[0], &params) * tree.width(idx.level, 0);
            }
        }
        sum
    }

    pub fn flame_velocity_on_field(&self, data: &[f64], dx: f64) -> f64 {
        let params = match &self.kind {
            ModelKind::Flame1d { params, .. } => *params,
            _ => return 0.0,
        };
        data.iter().map(|t| flame_reaction_rate(*t, &params) * dx).sum()
    }

    pub fn set_flame_velocity(&mut self, v: f64) {
        if let ModelKind::Flame1d { v_f, .. } = &mut self.kind {
            *v_f = v;
        }
    }
}

/// Run parameters the paper fixes per experiment.
#[derive(Debug, Clone, Copy)]
pub struct ProblemDefaults {
    pub sigma: f64,
    pub epsilon: f64,
    pub t_end: f64,
    pub max_level: u8,
}

/// Fully parameterized named problems from the experiments.
pub fn builtin_problems(name: &str) -> Result<(ModelSpec, ProblemDefaults)> {
    let fill = |lo1: f64, hi1: f64, d: usize| {
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [1.0; MAX_DIM];
        for a in 0..d {
            lo[a] = lo1;
            hi[a] = hi1;
        }
        (lo, hi)
    };
    match name {
        "advection1d" => {
            let (lo, hi) = fill(0.0, 1.0, 1);
            Ok((
                ModelSpec {
                    name: name.into(),
                    kind: ModelKind::Advection1d { speed: 1.0 },
                    dim: 1,
                    ncomp: 1,
                    nu: 0.0,
                    lo,
                    hi,
                    ghost: GhostSpec::all_periodic(),
                },
                ProblemDefaults { sigma: 0.5, epsilon: 0.01, t_end: 1.0, max_level: 9 },
            ))
        }
        "burgers1d" => {
            let (lo, hi) = fill(0.0, 1.0, 1);
            Ok((
                ModelSpec {
                    name: name.into(),
                    kind: ModelKind::Burgers1d,
                    dim: 1,
                    ncomp: 1,
                    nu: 0.0,
                    lo,
                    hi,
                    ghost: GhostSpec::all_periodic(),
                },
                ProblemDefaults { sigma: 0.5, epsilon: 0.01, t_end: 0.5, max_level: 8 },
            ))
        }
        "burgers2d" => {
            let (lo, hi) = fill(0.0, 1.0, 2);
            let zero = GhostBc::DirichletExtrap(vec![0.0]);
            Ok((
                ModelSpec {
                    name: name.into(),
                    kind: ModelKind::Burgers2d,
                    dim: 2,
                    ncomp: 1,
                    nu: 0.0,
                    lo,
                    hi,
                    ghost: GhostSpec {
                        faces: std::array::from_fn(|_| [zero.clone(), zero.clone()]),
                    },
                },
                ProblemDefaults { sigma: 0.5, epsilon: 0.01, t_end: 0.9, max_level: 8 },
            ))
        }
        "flame1d" => {
            let (lo, hi) = fill(-15.0, 15.0, 1);
            Ok((
                ModelSpec {
                    name: name.into(),
                    kind: ModelKind::Flame1d {
                        params: FlameParams::new(10.0, 0.8),
                        v_f: 0.0,
                    },
                    dim: 1,
                    ncomp: 1,
                    nu: 1.0,
                    lo,
                    hi,
                    ghost: GhostSpec {
                        faces: [
                            [GhostBc::Mirror, GhostBc::DirichletExtrap(vec![0.0])],
                            [GhostBc::Mirror, GhostBc::Mirror],
                            [GhostBc::Mirror, GhostBc::Mirror],
                        ],
                    },
                },
                ProblemDefaults { sigma: 0.5, epsilon: 0.01, t_end: 5.0, max_level: 10 },
            ))
        }
        "euler2d" => {
            let (lo, hi) = fill(0.0, 1.0, 2);
            Ok((
                ModelSpec {
                    name: name.into(),
                    kind: ModelKind::Euler2d { gamma: 1.4 },
                    dim: 2,
                    ncomp: 4,
                    nu: 0.0,
                    lo,
                    hi,
                    ghost: GhostSpec::all_mirror(),
                },
                ProblemDefaults { sigma: 0.5, epsilon: 0.01, t_end: 0.25, max_level: 8 },
            ))
        }
        _ => Err(Error::UnknownProblem(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn centered_flux_examples() {
        let id = |q: &State| q.clone();
        assert_eq!(centered_flux(&smallvec![1.0], &smallvec![3.0], id)[0], 2.0);
        let b = |q: &State| -> State { smallvec![0.5 * q[0] * q[0]] };
        assert_eq!(centered_flux(&smallvec![0.0], &smallvec![2.0], b)[0], 1.0);
        assert_eq!(centered_flux(&smallvec![0.7], &smallvec![0.7], id)[0], 0.7);
    }

    #[test]
    fn godunov_cases() {
        assert_eq!(burgers_upwind_flux(0.5, 0.5), 0.125);
        assert_eq!(burgers_upwind_flux(1.0, 0.0), 0.5);
        assert_eq!(burgers_upwind_flux(-1.0, 1.0), 0.0);
        // left-moving shock
        assert_eq!(burgers_upwind_flux(0.0, -1.0), 0.5);
        // supersonic rarefactions
        assert_eq!(burgers_upwind_flux(0.5, 1.0), 0.125);
        assert_eq!(burgers_upwind_flux(-1.0, -0.5), 0.125);
    }

    #[test]
    fn diffusive_examples() {
        let z = diffusive_flux(&smallvec![1.0], &smallvec![1.0], 0.5, 1.0);
        assert_eq!(z[0], 0.0);
        let f = diffusive_flux(&smallvec![0.0], &smallvec![1.0], 0.5, 1.0);
        assert_eq!(f[0], -2.0);
        // heat flows from hot to cold: for T_left > T_right the flux is positive
        let f = diffusive_flux(&smallvec![2.0], &smallvec![1.0], 1.0, 1.0);
        assert!(f[0] > 0.0);
    }

    #[test]
    fn maccormack_examples() {
        assert_eq!(maccormack_advective_update(&[1.0, 1.0, 1.0], 2.0, 0.1, 0.01), 0.0);
        let dx = 0.25;
        let inc = maccormack_advective_update(&[0.0, dx, 2.0 * dx], 1.0, dx, 0.05);
        assert!((inc + 0.05).abs() < 1e-15); // exact transport of T(x)=x
        assert_eq!(maccormack_advective_update(&[0.3, 0.9, 0.1], 0.0, 0.1, 0.05), 0.0);
    }

    #[test]
    fn maccormack_staged_equals_fused() {
        // The stage-1 downwind / stage-2 upwind fluxes composed through the
        // compact RK2 step reproduce the fused predictor-corrector increment.
        let v_f = 0.8;
        let dx = 0.2;
        let dt = 0.04;
        let t = [0.3, 0.7, 0.2, 0.9, 0.4];
        // predictor for cells 1..4
        let mut tp = [0.0; 5];
        for i in 1..4 {
            tp[i] = t[i] - v_f * dt / dx * (t[i + 1] - t[i]);
        }
        tp[0] = t[0] - v_f * dt / dx * (t[1] - t[0]);
        // corrector at cell 2
        let t2 = 0.5 * t[2] + 0.5 * (tp[2] - v_f * dt / dx * (tp[2] - tp[1]));
        let fused = t[2] + maccormack_advective_update(&[t[1], t[2], t[3]], v_f, dx, dt);
        assert!((t2 - fused).abs() < 1e-14);
    }

    #[test]
    fn flame_rate_examples() {
        let p = FlameParams::new(10.0, 0.8);
        assert_eq!(flame_reaction_rate(1.0, &p), 0.0);
        let w0 = flame_reaction_rate(0.0, &p);
        assert!((w0 - 50.0 * (-50.0f64).exp()).abs() < 1e-18);
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            assert!(flame_reaction_rate(t, &p) >= 0.0, "T={t}");
        }
    }

    #[test]
    fn euler_pressure_examples() {
        let gamma = 1.4;
        let q: State = smallvec![1.0, 0.0, 0.0, 1.0 / (gamma - 1.0)];
        assert!((euler_pressure(&q, gamma).unwrap() - 1.0).abs() < 1e-14);
        // quadrant 2 of the Lax-Liu configuration
        let s = EulerState { rho: 2.0, vx: 0.75, vy: 0.5, p: 1.0 };
        let q = s.to_conserved(gamma);
        let e_expect = 1.0 / (gamma - 1.0) + 2.0 * (0.75 * 0.75 + 0.5 * 0.5) / 2.0;
        assert!((q[3] - e_expect).abs() < 1e-14);
        assert!((euler_pressure(&q, gamma).unwrap() - 1.0).abs() < 1e-14);
        // doubling rho and E at rest doubles p
        let q1: State = smallvec![1.0, 0.0, 0.0, 2.0];
        let q2: State = smallvec![2.0, 0.0, 0.0, 4.0];
        let p1 = euler_pressure(&q1, gamma).unwrap();
        let p2 = euler_pressure(&q2, gamma).unwrap();
        assert!((p2 - 2.0 * p1).abs() < 1e-14);
        // inadmissible
        assert!(euler_pressure(&smallvec![-1.0, 0.0, 0.0, 1.0], gamma).is_err());
    }

    #[test]
    fn ausm_consistency_random_states() {
        let gamma = 1.4;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = EulerState {
                rho: rng.gen_range(0.1..3.0),
                vx: rng.gen_range(-2.0..2.0),
                vy: rng.gen_range(-2.0..2.0),
                p: rng.gen_range(0.1..3.0),
            };
            let q = s.to_conserved(gamma);
            for axis in 0..2 {
                let f = ausm_plus_flux(&q, &q, axis, gamma).unwrap();
                let fp = {
                    let spec = builtin_problems("euler2d").unwrap().0;
                    spec.physical_flux(axis, &q)
                };
                for k in 0..4 {
                    assert!(
                        (f[k] - fp[k]).abs() < 1e-11 * (1.0 + fp[k].abs()),
                        "axis {axis} comp {k}: {} vs {}",
                        f[k],
                        fp[k]
                    );
                }
            }
        }
    }

    #[test]
    fn ausm_supersonic_upwinding() {
        let gamma = 1.4;
        let l = EulerState { rho: 1.0, vx: 3.0, vy: 0.2, p: 1.0 }.to_conserved(gamma);
        let r = EulerState { rho: 0.5, vx: 2.5, vy: -0.1, p: 0.8 }.to_conserved(gamma);
        let f = ausm_plus_flux(&l, &r, 0, gamma).unwrap();
        let spec = builtin_problems("euler2d").unwrap().0;
        let fl = spec.physical_flux(0, &l);
        for k in 0..4 {
            assert!((f[k] - fl[k]).abs() < 1e-12, "comp {k}");
        }
    }

    #[test]
    fn ausm_mirror_states_pressure_only() {
        let gamma = 1.4;
        let l = EulerState { rho: 1.3, vx: 0.4, vy: 0.7, p: 0.9 }.to_conserved(gamma);
        let r = EulerState { rho: 1.3, vx: -0.4, vy: 0.7, p: 0.9 }.to_conserved(gamma);
        let f = ausm_plus_flux(&l, &r, 0, gamma).unwrap();
        assert!(f[0].abs() < 1e-14, "mass flux {}", f[0]);
        assert!(f[2].abs() < 1e-14, "transverse flux {}", f[2]);
        assert!(f[3].abs() < 1e-14, "energy flux {}", f[3]);
        assert!(f[1] > 0.0); // pure interface pressure
    }

    #[test]
    fn ausm_reflection_identity() {
        // flux(Rx b, Rx a) = (-f0, f1, -f2, -f3) where Rx negates the normal
        // momentum.
        let gamma = 1.4;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let reflect = |q: &State| -> State { smallvec![q[0], -q[1], q[2], q[3]] };
        for _ in 0..100 {
            let mut st = || {
                EulerState {
                    rho: rng.gen_range(0.2..3.0),
                    vx: rng.gen_range(-2.0..2.0),
                    vy: rng.gen_range(-2.0..2.0),
                    p: rng.gen_range(0.2..3.0),
                }
                .to_conserved(gamma)
            };
            let a = st();
            let b = st();
            let f = ausm_plus_flux(&a, &b, 0, gamma).unwrap();
            let g = ausm_plus_flux(&reflect(&b), &reflect(&a), 0, gamma).unwrap();
            let scale = 1.0 + f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((g[0] + f[0]).abs() < 1e-13 * scale);
            assert!((g[1] - f[1]).abs() < 1e-13 * scale);
            assert!((g[2] + f[2]).abs() < 1e-13 * scale);
            assert!((g[3] + f[3]).abs() < 1e-13 * scale);
        }
    }

    #[test]
    fn builtin_values() {
        let (euler, d) = builtin_problems("euler2d").unwrap();
        assert_eq!(d.sigma, 0.5);
        assert_eq!(d.t_end, 0.25);
        let q4 = euler.initial_condition(&[0.75, 0.25]);
        let s = EulerState::from_conserved(&q4, 1.4).unwrap();
        assert_eq!(s.rho, 3.0);
        assert!((s.p - 1.0).abs() < 1e-14);
        assert_eq!(s.vx, -0.75);
        assert_eq!(s.vy, -0.5);

        let (burgers, d) = builtin_problems("burgers2d").unwrap();
        assert_eq!(d.t_end, 0.9);
        let v = burgers.initial_condition(&[0.25, 0.25]);
        assert!((v[0] - 1.0).abs() < 1e-14);

        let (flame, d) = builtin_problems("flame1d").unwrap();
        assert_eq!(d.t_end, 5.0);
        assert_eq!(flame.initial_condition(&[1.0])[0], 1.0);
        assert!((flame.initial_condition(&[2.0])[0] - (-1.0f64).exp()).abs() < 1e-15);

        assert!(builtin_problems("nope").is_err());
    }

    #[test]
    fn flame_velocity_quadrature() {
        use crate::mr::ThresholdPolicy;
        use crate::tree::GradedTree;
        let (mut model, _) = builtin_problems("flame1d").unwrap();
        // T = 1 everywhere: omega = 0, so v_f = 0
        let mut t = GradedTree::new_uniform(1, 6, 6, model.lo, model.hi, [false; 3], 1);
        for idx in t.all_leaves() {
            t.record_mut(idx).q_n = smallvec![1.0];
        }
        assert_eq!(model.flame_velocity_on_tree(&t), 0.0);

        // adaptive vs uniform quadrature of the smooth initial profile
        let level = 8u8;
        let mut uni = GradedTree::new_uniform(1, level, level, model.lo, model.hi, [false; 3], 1);
        for idx in uni.all_leaves() {
            let x = uni.center(idx)[0];
            let v = model.initial_condition(&[x]);
            uni.record_mut(idx).q_n = v;
        }
        let v_uniform = model.flame_velocity_on_tree(&uni);
        assert!(v_uniform > 0.1, "flame burns: v_f = {v_uniform}");
        let eps = 1e-3;
        let mut adapted = uni.clone();
        crate::mr::adapt_grid(&mut adapted, &ThresholdPolicy::new(eps, 1), &model.ghost, 0).unwrap();
        let (leaves, _, _) = adapted.leaf_statistics();
        assert!(leaves < (1 << level));
        let v_adaptive = model.flame_velocity_on_tree(&adapted);
        assert!(
            (v_adaptive - v_uniform).abs() < 50.0 * eps,
            "quadratures differ: {v_uniform} vs {v_adaptive}"
        );
        model.set_flame_velocity(v_uniform);
        match model.kind {
            ModelKind::Flame1d { v_f, .. } => assert_eq!(v_f, v_uniform),
            _ => unreachable!(),
        }
    }

    #[test]
    fn ghost_rules() {
        let (flame, _) = builtin_problems("flame1d").unwrap();
        // left face: Neumann mirror
        let g = flame.ghost.ghost_value(0, -1, &smallvec![3.0]);
        assert_eq!(g[0], 3.0);
        // right face: Dirichlet 0
        let g = flame.ghost.ghost_value(0, 1, &smallvec![0.4]);
        assert!((g[0] + 0.4).abs() < 1e-15);
    }
}
