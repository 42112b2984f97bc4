//! Local time-stepping scheduler: level-dependent steps, stage-wise
//! synchronization through projections, extrapolations and NERK dense
//! output, and the restricted remeshing rule. The synchronous (global-step)
//! sweep used by the MR and FV schemes shares the same stage machinery so
//! the local time-stepping variants degenerate to it bit for bit on uniform
//! grids.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{face_flux, ModelSpec};
use crate::mr::{self, GhostSpec, ThresholdPolicy};
use crate::state::{self, Slot, State};
use crate::time::{rk2_stage2, rk3_stage2, rk3_stage3, SchemeKind};
use crate::tree::{CellIndex, GradedTree, NodeKind};

/// Iteration clock of the local time-stepping loop. `n` counts iterations of
/// the finest step `dt` within the current coarse cycle.
#[derive(Debug, Clone, Copy)]
pub struct LtClock {
    pub dt: f64,
    pub n: u64,
}

/// dt_l = 2^(L-l) dt.
pub fn level_timestep(level: u8, max_level: u8, dt: f64) -> f64 {
    (1u64 << (max_level - level)) as f64 * dt
}

/// Smallest level l with n mod 2^(L-l) = 0.
pub fn min_active_level(n: u64, max_level: u8) -> u8 {
    for l in 0..=max_level {
        if n % (1u64 << (max_level - l)) == 0 {
            return l;
        }
    }
    max_level
}

/// Leaf-sweep flavor: one global step for all levels, or per-level steps with
/// time synchronization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Synchronous,
    LocalTime,
}

/// Slot holding a cell's value at the midpoint of its own step.
pub fn midpoint_slot(scheme: SchemeKind) -> Slot {
    if scheme.is_rk3() {
        Slot::QDstar
    } else {
        Slot::NerkHalf
    }
}

/// How stencil cells are turned into values during a refresh.
#[derive(Debug, Clone, Copy)]
enum ValueRule {
    SlotRead(Slot),
    /// First-order mid-step value: nodes read the projected midpoint slot,
    /// leaves and virtual leaves use (q_n + q*)/2.
    Midpoint,
    /// End-of-step value: leaves hold it in q_n after their update, nodes and
    /// virtual leaves reconstruct -2 q_n - q* + 4 q_mid.
    EndOfStep,
}

fn resolve_value(rec: &crate::tree::CellRecord, rule: ValueRule, scheme: SchemeKind) -> State {
    match rule {
        ValueRule::SlotRead(s) => rec.slot(s).clone(),
        ValueRule::Midpoint => match rec.kind {
            NodeKind::Internal => rec.slot(midpoint_slot(scheme)).clone(),
            _ => state::lin2(0.5, &rec.q_n, 0.5, &rec.q_star),
        },
        ValueRule::EndOfStep => match (rec.kind, scheme.is_rk3()) {
            (NodeKind::Leaf, _) => rec.q_n.clone(),
            // Three-stage schemes reconstruct the node end as
            // q^n + 2 (q_{3/4} - q_{1/4}); that value is kept in the
            // q_{1/2} slot by the third-stage projection.
            (NodeKind::Internal, true) => rec.nerk_half.clone(),
            (NodeKind::VirtualLeaf, true) => state::lin3(
                1.0,
                &rec.q_n,
                2.0,
                &rec.nerk_threequarter,
                -2.0,
                &rec.nerk_quarter,
            ),
            // Two-stage schemes use -2 q^n - q* + 4 q_{1/2}.
            (_, false) => state::lin3(
                -2.0,
                &rec.q_n,
                -1.0,
                &rec.q_star,
                4.0,
                &rec.nerk_half,
            ),
        },
    }
}

fn stencil_values_by(
    tree: &GradedTree,
    center: CellIndex,
    ghost: &GhostSpec,
    rule: ValueRule,
    scheme: SchemeKind,
) -> Result<Vec<State>> {
    let dim = tree.dim;
    let n = 1i64 << center.level;
    let count = 3usize.pow(dim as u32);
    let mut out = Vec::with_capacity(count);
    for lin in 0..count {
        let mut rem = lin;
        let mut coords = center.coords;
        let mut dirichlet: Vec<&Vec<f64>> = Vec::new();
        for axis in 0..dim {
            let off = (rem % 3) as i64 - 1;
            rem /= 3;
            let mut c = center.coords[axis] as i64 + off;
            if c < 0 || c >= n {
                match &ghost.faces[axis][if c < 0 { 0 } else { 1 }] {
                    mr::GhostBc::Periodic => c = c.rem_euclid(n),
                    mr::GhostBc::Mirror => c = if c < 0 { -c - 1 } else { 2 * n - 1 - c },
                    mr::GhostBc::DirichletExtrap(g) => {
                        c = if c < 0 { -c - 1 } else { 2 * n - 1 - c };
                        dirichlet.push(g);
                    }
                }
            }
            coords[axis] = c as u32;
        }
        // Walk up to the covering cell when the exact one is absent.
        let mut cur = CellIndex::new(center.level, coords);
        let rec = loop {
            if let Some(r) = tree.nodes.get(&cur) {
                break r;
            }
            cur = cur
                .parent()
                .ok_or_else(|| Error::MissingStencil(center.fmt_short(dim)))?;
        };
        let mut v = resolve_value(rec, rule, scheme);
        for g in dirichlet {
            v = g.iter().zip(v.iter()).map(|(gv, iv)| 2.0 * gv - iv).collect();
        }
        out.push(v);
    }
    Ok(out)
}

/// Predict `dst_slot` for the virtual leaves at `level` using `rule` to read
/// the parent-level stencil.
fn predict_virtuals_by(
    tree: &mut GradedTree,
    level: u8,
    dst_slot: Slot,
    ghost: &GhostSpec,
    rule: ValueRule,
    scheme: SchemeKind,
) -> Result<()> {
    let virtuals = tree.level_lists(level).virtuals.clone();
    if virtuals.is_empty() {
        return Ok(());
    }
    let mut by_parent: std::collections::HashMap<CellIndex, Vec<CellIndex>> =
        std::collections::HashMap::new();
    for v in virtuals {
        by_parent.entry(v.parent().expect("virtual has parent")).or_default().push(v);
    }
    let mut parents: Vec<CellIndex> = by_parent.keys().copied().collect();
    parents.sort_unstable();
    for p in parents {
        let stencil = stencil_values_by(tree, p, ghost, rule, scheme)?;
        for v in &by_parent[&p] {
            let val = mr::predict_child(&stencil, tree.dim, v.child_slot(tree.dim));
            *tree.record_mut(*v).slot_mut(dst_slot) = val;
        }
    }
    Ok(())
}

fn project_level(tree: &mut GradedTree, level: u8, src: Slot, dst: Slot) {
    let parents = tree.level_lists(level).internals.clone();
    for p in parents {
        let children = tree.children(p).expect("internal has children");
        let vals: Vec<State> = children
            .iter()
            .map(|c| tree.record(*c).slot(src).clone())
            .collect();
        *tree.record_mut(p).slot_mut(dst) = mr::project(&vals);
    }
}

// ---------------------------------------------------------------------------
// Flux sweeps
// ---------------------------------------------------------------------------

fn stage_basis(stage: usize) -> Slot {
    match stage {
        1 => Slot::QN,
        2 => Slot::QStar,
        _ => Slot::QDstar,
    }
}

/// Value of a fine cell (level l+1) read by the coarse sweep of level l at
/// the coarse stage instant.
fn fine_cell_value(
    tree: &GradedTree,
    model: &ModelSpec,
    scheme: SchemeKind,
    mode: SweepMode,
    idx: CellIndex,
    stage: usize,
    dt_fine: f64,
) -> Result<State> {
    let rec = tree.record(idx);
    if mode == SweepMode::Synchronous {
        return Ok(rec.slot(stage_basis(stage)).clone());
    }
    match (stage, rec.kind) {
        (1, _) => Ok(rec.q_n.clone()),
        // One further RK1 step: q* + dt f(q*) = q^n + k1 + k2. The plain
        // MRLT/RK2 scheme has no such extrapolation and reads the stale q*.
        (2, NodeKind::Leaf) => {
            if scheme == SchemeKind::MrltRk2 {
                Ok(rec.q_star.clone())
            } else {
                Ok(state::lin2(1.0, &rec.q_star, dt_fine, &rec.flux_acc))
            }
        }
        // Virtual children re-predicted at the coarse instant from the
        // coarse-level q* (after the second-stage projection improved it).
        (2, NodeKind::VirtualLeaf) => {
            let p = idx.parent().expect("virtual has parent");
            let stencil =
                stencil_values_by(tree, p, &model.ghost, ValueRule::SlotRead(Slot::QStar), scheme)?;
            Ok(mr::predict_child(&stencil, tree.dim, idx.child_slot(tree.dim)))
        }
        (3, NodeKind::Leaf) => Ok(rec.q_n.clone()),
        (3, NodeKind::VirtualLeaf) => {
            let p = idx.parent().expect("virtual has parent");
            let stencil = stencil_values_by(
                tree,
                p,
                &model.ghost,
                ValueRule::SlotRead(Slot::QDstar),
                scheme,
            )?;
            Ok(mr::predict_child(&stencil, tree.dim, idx.child_slot(tree.dim)))
        }
        _ => unreachable!("internal node read as fine cell"),
    }
}

/// RHS of one leaf: sum over faces of (F_low - F_high)/dx plus the source.
fn leaf_rhs(
    tree: &GradedTree,
    model: &ModelSpec,
    scheme: SchemeKind,
    mode: SweepMode,
    leaf: CellIndex,
    stage: usize,
    dt_fine_next: f64,
) -> Result<State> {
    let basis = stage_basis(stage);
    let rec = tree.record(leaf);
    let own = rec.slot(basis);

    // Diagnostic linear model: dq/dt = lambda * (interface partner value).
    if let Some(lambda) = model.probe_lambda() {
        let mut virt: Option<State> = None;
        let mut finer: Vec<State> = Vec::new();
        for axis in 0..tree.dim {
            for side in [-1, 1] {
                if let Some(nb) = tree.same_level_neighbor(leaf, axis, side) {
                    match tree.kind(nb) {
                        Some(NodeKind::VirtualLeaf) => {
                            if virt.is_none() {
                                virt = Some(tree.record(nb).slot(basis).clone());
                            }
                        }
                        Some(NodeKind::Internal) => {
                            let mut acc = state::zeros(tree.ncomp);
                            let fcs = tree.face_children(leaf, axis, side)?;
                            let m = fcs.len() as f64;
                            for vc in fcs {
                                let fine = tree
                                    .same_level_neighbor(vc, axis, side)
                                    .expect("interior face");
                                let v = fine_cell_value(
                                    tree, model, scheme, mode, fine, stage, dt_fine_next,
                                )?;
                                state::axpy(&mut acc, 1.0 / m, &v);
                            }
                            finer.push(acc);
                        }
                        _ => {}
                    }
                }
            }
        }
        let partner = virt.unwrap_or_else(|| {
            if finer.is_empty() {
                own.clone()
            } else {
                let mut acc = state::zeros(tree.ncomp);
                let m = finer.len() as f64;
                for f in &finer {
                    state::axpy(&mut acc, 1.0 / m, f);
                }
                acc
            }
        });
        return Ok(state::scale(&partner, lambda));
    }

    let mut rhs = state::zeros(tree.ncomp);
    for axis in 0..tree.dim {
        let dx = tree.width(leaf.level, axis);
        for side in [-1, 1] {
            let flux = match tree.same_level_neighbor(leaf, axis, side) {
                None => {
                    let ghost_v = model.ghost.ghost_value(axis, side, own);
                    face_flux(model, axis, side, own, &ghost_v, dx, stage)?
                }
                Some(nb) => match tree.kind(nb) {
                    Some(NodeKind::Leaf) | Some(NodeKind::VirtualLeaf) => {
                        let pv = tree.record(nb).slot(basis);
                        face_flux(model, axis, side, own, pv, dx, stage)?
                    }
                    Some(NodeKind::Internal) => {
                        // Flux through our own virtual children paired with the
                        // adjacent finer leaves, averaged over the sub-faces.
                        let dx_f = tree.width(leaf.level + 1, axis);
                        let fcs = tree.face_children(leaf, axis, side)?;
                        let m = fcs.len() as f64;
                        let mut acc = state::zeros(tree.ncomp);
                        for vc in fcs {
                            let fine =
                                tree.same_level_neighbor(vc, axis, side).expect("interior face");
                            if !matches!(
                                tree.kind(fine),
                                Some(NodeKind::Leaf) | Some(NodeKind::VirtualLeaf)
                            ) {
                                return Err(Error::Ungraded(leaf.fmt_short(tree.dim)));
                            }
                            let vcv = fine_cell_value(
                                tree, model, scheme, mode, vc, stage, dt_fine_next,
                            )?;
                            let fv = fine_cell_value(
                                tree, model, scheme, mode, fine, stage, dt_fine_next,
                            )?;
                            let f = face_flux(model, axis, side, &vcv, &fv, dx_f, stage)?;
                            state::axpy(&mut acc, 1.0 / m, &f);
                        }
                        acc
                    }
                    None => return Err(Error::Ungraded(leaf.fmt_short(tree.dim))),
                },
            };
            // side -1 face is the low face: +F_low/dx; side +1: -F_high/dx.
            state::axpy(&mut rhs, -(side as f64) / dx, &flux);
        }
    }
    if let Some(src) = model.source(own) {
        state::axpy(&mut rhs, 1.0, &src);
    }
    Ok(rhs)
}

/// Two-phase stage sweep over the leaves of one level: parallel RHS gather,
/// then the compact-RK combine. Returns nothing; flux_acc keeps the RHS.
#[allow(clippy::too_many_arguments)]
fn stage_sweep(
    tree: &mut GradedTree,
    model: &ModelSpec,
    scheme: SchemeKind,
    mode: SweepMode,
    level: u8,
    stage: usize,
    dt_level: f64,
    expected_clock: u64,
    clock_step: u64,
) -> Result<()> {
    let leaves: Vec<CellIndex> = tree.level_lists(level).leaves.clone();
    if leaves.is_empty() {
        return Ok(());
    }
    for l in &leaves {
        let c = tree.record(*l).clock;
        assert!(
            c == expected_clock,
            "leaf {} clock {} out of sync (expected {})",
            l.fmt_short(tree.dim),
            c,
            expected_clock
        );
    }
    let dt_fine_next = dt_level * 0.5;
    let rhs: Vec<(CellIndex, State)> = if leaves.len() >= 8192 {
        let tref = &*tree;
        leaves
            .par_iter()
            .map(|l| leaf_rhs(tref, model, scheme, mode, *l, stage, dt_fine_next).map(|r| (*l, r)))
            .collect::<Result<Vec<_>>>()?
    } else {
        let mut v = Vec::with_capacity(leaves.len());
        for l in &leaves {
            v.push((*l, leaf_rhs(tree, model, scheme, mode, *l, stage, dt_fine_next)?));
        }
        v
    };
    for (idx, f) in rhs {
        let rec = tree.record_mut(idx);
        rec.flux_acc = f;
        match stage {
            1 => {
                rec.q_star = state::lin2(1.0, &rec.q_n, dt_level, &rec.flux_acc);
                match scheme {
                    SchemeKind::MrltNerk2 => {
                        rec.nerk_half =
                            state::lin2(1.0, &rec.q_n, 3.0 / 8.0 * dt_level, &rec.flux_acc);
                    }
                    SchemeKind::MrltRk2 => {
                        // first-order mid-step value q^n + k1/2
                        rec.nerk_half = state::lin2(1.0, &rec.q_n, 0.5 * dt_level, &rec.flux_acc);
                    }
                    SchemeKind::MrltNerk3 => {
                        rec.nerk_quarter =
                            state::lin2(1.0, &rec.q_n, 7.0 / 32.0 * dt_level, &rec.flux_acc);
                        rec.nerk_threequarter =
                            state::lin2(1.0, &rec.q_n, 15.0 / 32.0 * dt_level, &rec.flux_acc);
                    }
                    _ => {}
                }
            }
            2 => {
                if scheme.is_rk3() {
                    if scheme == SchemeKind::MrltNerk3 {
                        state::axpy(&mut rec.nerk_quarter, dt_level / 32.0, &rec.flux_acc);
                        state::axpy(
                            &mut rec.nerk_threequarter,
                            9.0 / 32.0 * dt_level,
                            &rec.flux_acc,
                        );
                    }
                    rec.q_dstar = rk3_stage2(&rec.q_n, &rec.q_star, &rec.flux_acc, dt_level);
                } else {
                    if scheme == SchemeKind::MrltNerk2 {
                        state::axpy(&mut rec.nerk_half, dt_level / 8.0, &rec.flux_acc);
                    }
                    rec.q_n = rk2_stage2(&rec.q_n, &rec.q_star, &rec.flux_acc, dt_level);
                    rec.clock += clock_step;
                }
            }
            _ => {
                rec.q_n = rk3_stage3(&rec.q_n, &rec.q_dstar, &rec.flux_acc, dt_level);
                rec.clock += clock_step;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Local time-stepping refreshes and stages
// ---------------------------------------------------------------------------

/// Project q^n into the internal nodes of every active level, fill the
/// mid-step slot of level l_min - 1 by projecting the just-synchronized
/// children, and predict the virtual leaves at t^n.
pub fn refresh_before_stage1(
    tree: &mut GradedTree,
    model: &ModelSpec,
    scheme: SchemeKind,
    l_min: u8,
) -> Result<()> {
    let max = tree.max_level;
    for l in (l_min..max).rev() {
        project_level(tree, l, Slot::QN, Slot::QN);
    }
    if l_min > 0 {
        let c = l_min - 1;
        // Their children at l_min sit at the global t^n, which is the
        // midpoint of the level-c step.
        project_level(tree, c, Slot::QN, midpoint_slot(scheme));
    }
    for l in l_min..=max {
        if l == l_min && l_min > 0 {
            predict_virtuals_by(
                tree,
                l,
                Slot::QN,
                &model.ghost,
                ValueRule::SlotRead(midpoint_slot(scheme)),
                scheme,
            )?;
        } else {
            predict_virtuals_by(tree, l, Slot::QN, &model.ghost, ValueRule::SlotRead(Slot::QN), scheme)?;
        }
    }
    Ok(())
}

/// After stage 1: nodes store the first-order mid-step children mean and the
/// linear extrapolation 2 q_mid - q^n as q*; virtual leaves get q* predicted
/// at their own stage-2 instants (end-of-step values of level l_min - 1 feed
/// the coarsest active level). The plain MRLT/RK2 scheme skips the node
/// extrapolation and keeps the half-step stale children mean.
pub fn refresh_before_stage2(
    tree: &mut GradedTree,
    model: &ModelSpec,
    scheme: SchemeKind,
    l_min: u8,
) -> Result<()> {
    let max = tree.max_level;
    let mid = midpoint_slot(scheme);
    for l in (l_min..max).rev() {
        project_level(tree, l, Slot::QStar, mid);
        let nodes = tree.level_lists(l).internals.clone();
        for p in nodes {
            let rec = tree.record_mut(p);
            let m = rec.slot(mid).clone();
            rec.q_star = if scheme == SchemeKind::MrltRk2 {
                m
            } else {
                state::lin2(2.0, &m, -1.0, &rec.q_n)
            };
        }
    }
    for l in l_min..=max {
        let rule = if l == l_min && l_min > 0 {
            ValueRule::EndOfStep
        } else {
            ValueRule::Midpoint
        };
        predict_virtuals_by(tree, l, Slot::QStar, &model.ghost, rule, scheme)?;
        if !scheme.is_rk3() {
            // Mid-step value of the virtual leaves by linear interpolation.
            let virtuals = tree.level_lists(l).virtuals.clone();
            for v in virtuals {
                let rec = tree.record_mut(v);
                rec.nerk_half = state::lin2(0.5, &rec.q_n, 0.5, &rec.q_star);
            }
        }
    }
    Ok(())
}

/// Projection inside the second RK step: each internal node at `level`
/// receives the mean over children of their values at t^n + 2 dt_{l+1}
/// (extrapolated leaves, linearly extrapolated nodes), stored in q*. Without
/// the extrapolations (plain MRLT/RK2) the stale q* values are averaged.
pub fn stage2_projection(
    tree: &mut GradedTree,
    level: u8,
    dt_child: f64,
    scheme: SchemeKind,
) -> Result<()> {
    let nodes = tree.level_lists(level).internals.clone();
    let extrapolate = scheme != SchemeKind::MrltRk2;
    for p in nodes {
        let children = tree.children(p)?;
        let mut acc = state::zeros(tree.ncomp);
        let m = children.len() as f64;
        for ch in &children {
            let rec = tree.record(*ch);
            let v = match (rec.kind, extrapolate) {
                (NodeKind::Leaf, true) => state::lin2(1.0, &rec.q_star, dt_child, &rec.flux_acc),
                (_, true) => state::lin2(2.0, &rec.q_star, -1.0, &rec.q_n),
                (_, false) => rec.q_star.clone(),
            };
            state::axpy(&mut acc, 1.0 / m, &v);
        }
        tree.record_mut(p).q_star = acc;
    }
    Ok(())
}

/// Second RK step, finest level first, projecting each completed level onto
/// the next coarser one.
pub fn perform_stage2(
    tree: &mut GradedTree,
    model: &ModelSpec,
    scheme: SchemeKind,
    l_min: u8,
    clock: &LtClock,
) -> Result<()> {
    let max = tree.max_level;
    for l in (l_min..=max).rev() {
        if l != max {
            stage2_projection(tree, l, level_timestep(l + 1, max, clock.dt), scheme)?;
        }
        let dt_l = level_timestep(l, max, clock.dt);
        let step = 1u64 << (max - l);
        stage_sweep(
            tree,
            model,
            scheme,
            SweepMode::LocalTime,
            l,
            2,
            dt_l,
            clock.n,
            step,
        )?;
    }
    Ok(())
}

/// Before the third RK step: descend filling the node NERK slots from the
/// children's q**, then ascend re-predicting the virtual leaves' q** and
/// recovering their quarter slots by inverting the same relations.
pub fn refresh_before_stage3(
    tree: &mut GradedTree,
    model: &ModelSpec,
    scheme: SchemeKind,
    l_min: u8,
) -> Result<()> {
    let max = tree.max_level;
    for l in (l_min..max).rev() {
        project_level(tree, l, Slot::QDstar, Slot::NerkQuarter);
        let nodes = tree.level_lists(l).internals.clone();
        for p in nodes {
            let rec = tree.record_mut(p);
            rec.nerk_threequarter = state::lin3(
                -13.0 / 2.0,
                &rec.q_n,
                -3.0 / 2.0,
                &rec.q_star,
                9.0,
                &rec.nerk_quarter,
            );
            rec.q_dstar = state::lin3(
                -11.0 / 2.0,
                &rec.q_n,
                -3.0 / 2.0,
                &rec.q_star,
                8.0,
                &rec.nerk_quarter,
            );
        }
    }
    for l in l_min..=max {
        let src = if l == l_min && l_min > 0 {
            Slot::NerkThreeQuarter
        } else {
            Slot::NerkQuarter
        };
        predict_virtuals_by(tree, l, Slot::QDstar, &model.ghost, ValueRule::SlotRead(src), scheme)?;
        let virtuals = tree.level_lists(l).virtuals.clone();
        for v in virtuals {
            let rec = tree.record_mut(v);
            // Invert q** = -11/2 q^n - 3/2 q* + 8 q_{1/4}, then evaluate
            // q_{3/4} = -13/2 q^n - 3/2 q* + 9 q_{1/4}.
            rec.nerk_quarter = state::lin3(
                1.0 / 8.0,
                &rec.q_dstar,
                11.0 / 16.0,
                &rec.q_n,
                3.0 / 16.0,
                &rec.q_star,
            );
            rec.nerk_threequarter = state::lin3(
                -13.0 / 2.0,
                &rec.q_n,
                -3.0 / 2.0,
                &rec.q_star,
                9.0,
                &rec.nerk_quarter,
            );
        }
    }
    Ok(())
}

/// Projection inside the third RK step: node q** from the children's
/// completed step, node end value q^n + 2 (q_{3/4} - q_{1/4}). The end value
/// lives in the otherwise unused q_{1/2} slot so q* keeps the first-step
/// content needed by the post-evolution relation.
pub fn stage3_projection(tree: &mut GradedTree, level: u8) -> Result<()> {
    let nodes = tree.level_lists(level).internals.clone();
    for p in nodes {
        let children = tree.children(p)?;
        let mut acc = state::zeros(tree.ncomp);
        let m = children.len() as f64;
        for ch in &children {
            let rec = tree.record(*ch);
            let v = match rec.kind {
                NodeKind::Leaf => rec.q_n.clone(),
                _ => rec.nerk_half.clone(), // end value from the same relation one level down
            };
            state::axpy(&mut acc, 1.0 / m, &v);
        }
        let rec = tree.record_mut(p);
        rec.q_dstar = acc;
        rec.nerk_half = state::lin3(
            1.0,
            &rec.q_n,
            2.0,
            &rec.nerk_threequarter,
            -2.0,
            &rec.nerk_quarter,
        );
    }
    Ok(())
}

pub fn perform_stage3(
    tree: &mut GradedTree,
    model: &ModelSpec,
    scheme: SchemeKind,
    l_min: u8,
    clock: &LtClock,
) -> Result<()> {
    let max = tree.max_level;
    for l in (l_min..=max).rev() {
        if l != max {
            stage3_projection(tree, l)?;
        }
        let dt_l = level_timestep(l, max, clock.dt);
        let step = 1u64 << (max - l);
        stage_sweep(
            tree,
            model,
            scheme,
            SweepMode::LocalTime,
            l,
            3,
            dt_l,
            clock.n,
            step,
        )?;
    }
    Ok(())
}

/// After the RK stages: project the completed fine solutions into the parent
/// mid-step slots so the next iterations can predict their virtual leaves.
/// End-of-interval node values are reconstructed on demand from
/// -2 q^n - q* + 4 q_mid when a prediction needs them.
pub fn post_evolution_sync(tree: &mut GradedTree, scheme: SchemeKind, l_min: u8) -> Result<()> {
    let max = tree.max_level;
    let mid = midpoint_slot(scheme);
    let floor = l_min.saturating_sub(1);
    for p in (floor..max).rev() {
        project_level(tree, p, Slot::QN, mid);
    }
    Ok(())
}

/// Restricted remeshing: merges and splits only between two active levels.
pub fn lt_remesh(
    tree: &mut GradedTree,
    policy: &ThresholdPolicy,
    ghost: &GhostSpec,
    l_min: u8,
) -> Result<()> {
    mr::adapt_grid(tree, policy, ghost, l_min)
}

/// One iteration of the local time-stepping scheme.
pub fn lt_cycle(
    tree: &mut GradedTree,
    clock: &mut LtClock,
    model: &ModelSpec,
    scheme: SchemeKind,
    policy: Option<&ThresholdPolicy>,
) -> Result<()> {
    let max = tree.max_level;
    let l_min = min_active_level(clock.n, max);
    tree.rebuild_lists();
    refresh_before_stage1(tree, model, scheme, l_min)?;
    if let Some(p) = policy {
        lt_remesh(tree, p, &model.ghost, l_min)?;
        refresh_before_stage1(tree, model, scheme, l_min)?;
    }
    for l in (l_min..=max).rev() {
        let dt_l = level_timestep(l, max, clock.dt);
        let step = 1u64 << (max - l);
        stage_sweep(tree, model, scheme, SweepMode::LocalTime, l, 1, dt_l, clock.n, step)?;
    }
    refresh_before_stage2(tree, model, scheme, l_min)?;
    perform_stage2(tree, model, scheme, l_min, clock)?;
    if scheme.is_rk3() {
        refresh_before_stage3(tree, model, scheme, l_min)?;
        perform_stage3(tree, model, scheme, l_min, clock)?;
    }
    post_evolution_sync(tree, scheme, l_min)?;
    clock.n += 1;
    Ok(())
}

// ---------------------------------------------------------------------------
// Synchronous stepping (FV on a tree, MR with a global step)
// ---------------------------------------------------------------------------

fn refresh_slot_sync(tree: &mut GradedTree, model: &ModelSpec, scheme: SchemeKind, slot: Slot) -> Result<()> {
    let max = tree.max_level;
    for l in (0..max).rev() {
        project_level(tree, l, slot, slot);
    }
    for l in 0..=max {
        predict_virtuals_by(tree, l, slot, &model.ghost, ValueRule::SlotRead(slot), scheme)?;
    }
    Ok(())
}

/// One global time step over all leaves; shares the stage sweeps with the
/// local time-stepping path so both coincide on uniform grids.
pub fn mr_step(
    tree: &mut GradedTree,
    model: &ModelSpec,
    scheme: SchemeKind,
    dt: f64,
    step_index: u64,
    policy: Option<&ThresholdPolicy>,
) -> Result<()> {
    let max = tree.max_level;
    tree.rebuild_lists();
    refresh_slot_sync(tree, model, scheme, Slot::QN)?;
    if let Some(p) = policy {
        mr::adapt_grid(tree, p, &model.ghost, 0)?;
        refresh_slot_sync(tree, model, scheme, Slot::QN)?;
    }
    for l in (0..=max).rev() {
        stage_sweep(tree, model, scheme, SweepMode::Synchronous, l, 1, dt, step_index, 1)?;
    }
    refresh_slot_sync(tree, model, scheme, Slot::QStar)?;
    for l in (0..=max).rev() {
        stage_sweep(tree, model, scheme, SweepMode::Synchronous, l, 2, dt, step_index, 1)?;
    }
    if scheme.is_rk3() {
        refresh_slot_sync(tree, model, scheme, Slot::QDstar)?;
        for l in (0..=max).rev() {
            stage_sweep(tree, model, scheme, SweepMode::Synchronous, l, 3, dt, step_index, 1)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_problems, ModelKind};
    use crate::mr::GhostSpec;
    use crate::tree::MAX_DIM;
    use smallvec::smallvec;

    fn probe_model(lambda: f64) -> ModelSpec {
        ModelSpec {
            name: "probe".into(),
            kind: ModelKind::LinearProbe { lambda },
            dim: 1,
            ncomp: 1,
            nu: 0.0,
            lo: [0.0; MAX_DIM],
            hi: [1.0, 1.0, 1.0],
            ghost: GhostSpec::all_periodic(),
        }
    }

    /// Periodic 1-D layout with a coarse leaf on [0, 1/2] and two fine leaves
    /// on [1/2, 3/4], [3/4, 1]; the coarse leaf carries virtual children.
    pub(crate) fn two_level_tree(ncomp: usize) -> GradedTree {
        let mut t = GradedTree::new(1, 2, [0.0; MAX_DIM], [1.0, 1.0, 1.0], [true, false, false], ncomp);
        t.split_into_leaves(CellIndex::root());
        t.split_into_leaves(CellIndex::d1(1, 1));
        for v in [CellIndex::d1(2, 0), CellIndex::d1(2, 1)] {
            t.nodes.insert(v, crate::tree::CellRecord::new(NodeKind::VirtualLeaf, ncomp));
        }
        t.rebuild_lists();
        t.check_graded().unwrap();
        t
    }

    #[test]
    fn level_timestep_values() {
        assert_eq!(level_timestep(5, 5, 1e-3), 1e-3);
        assert!((level_timestep(3, 5, 1e-3) - 4e-3).abs() < 1e-18);
        assert!((level_timestep(0, 4, 0.25) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn min_active_level_values() {
        assert_eq!(min_active_level(0, 4), 0);
        assert_eq!(min_active_level(3, 4), 4);
        assert_eq!(min_active_level(4, 4), 2);
        assert_eq!(min_active_level(8, 4), 1);
    }

    #[test]
    fn stage2_projection_internal_children() {
        // children values q^n = (1, 1), q* = (2, 3), both internal:
        // projected q* = mean(2*2-1, 2*3-1) = 4.
        let mut t = two_level_tree(1);
        // make (1,1)'s children internal stand-ins by using level-1 nodes:
        // instead, project onto root from its two level-1 children.
        {
            let r = t.record_mut(CellIndex::d1(1, 0));
            r.kind = NodeKind::Internal;
            r.q_n = smallvec![1.0];
            r.q_star = smallvec![2.0];
        }
        {
            let r = t.record_mut(CellIndex::d1(1, 1));
            r.q_n = smallvec![1.0];
            r.q_star = smallvec![3.0];
        }
        t.record_mut(CellIndex::root()).kind = NodeKind::Internal;
        t.rebuild_lists();
        stage2_projection(&mut t, 0, 0.1, SchemeKind::MrltNerk2).unwrap();
        assert!((t.record(CellIndex::root()).q_star[0] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn stage3_refresh_constant_and_linear() {
        // -13/2 - 3/2 + 9 = 1 and -11/2 - 3/2 + 8 = 1 (constant fixed point);
        // on data linear in theta (q^n=0, q*=1, q_1/4=1/4): q_3/4 = 3/4 and
        // q** = 1/2.
        let c: State = smallvec![2.5];
        let v = state::lin3(-13.0 / 2.0, &c, -3.0 / 2.0, &c, 9.0, &c);
        assert!((v[0] - 2.5).abs() < 1e-14);
        let v = state::lin3(-11.0 / 2.0, &c, -3.0 / 2.0, &c, 8.0, &c);
        assert!((v[0] - 2.5).abs() < 1e-14);
        let qn: State = smallvec![0.0];
        let qs: State = smallvec![1.0];
        let q14: State = smallvec![0.25];
        let q34 = state::lin3(-13.0 / 2.0, &qn, -3.0 / 2.0, &qs, 9.0, &q14);
        assert!((q34[0] - 0.75).abs() < 1e-15);
        let qss = state::lin3(-11.0 / 2.0, &qn, -3.0 / 2.0, &qs, 8.0, &q14);
        assert!((qss[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn post_evolution_relation_linear() {
        // -2 q^n - q* + 4 q_1/2 reproduces constants and linear-in-time data.
        let c: State = smallvec![1.7];
        let v = state::lin3(-2.0, &c, -1.0, &c, 4.0, &c);
        assert!((v[0] - 1.7).abs() < 1e-14);
        let v = state::lin3(-2.0, &smallvec![0.0], -1.0, &smallvec![1.0], 4.0, &smallvec![0.5]);
        assert!((v[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn steady_state_cycles() {
        // A constant state under the probe model with lambda = 0 is a fixed
        // point of the LT cycle.
        let model = probe_model(0.0);
        for scheme in [SchemeKind::MrltNerk2, SchemeKind::MrltNerk3, SchemeKind::MrltRk2] {
            let mut t = two_level_tree(1);
            for rec in t.nodes.values_mut() {
                rec.q_n = smallvec![3.25];
            }
            let mut clock = LtClock { dt: 0.1, n: 0 };
            for _ in 0..4 {
                lt_cycle(&mut t, &mut clock, &model, scheme, None).unwrap();
            }
            for (idx, rec) in &t.nodes {
                if rec.kind == NodeKind::Leaf {
                    assert!(
                        (rec.q_n[0] - 3.25).abs() < 1e-13,
                        "{} drifted to {}",
                        idx.fmt_short(1),
                        rec.q_n[0]
                    );
                }
            }
        }
    }

    #[test]
    fn lt_fine_and_coarse_one_step_polynomials() {
        // One LT iteration on the two-level probe layout reproduces the
        // interface amplification polynomials exactly (checked here in
        // floating point; the rational harness pins the coefficients).
        let w = -0.05f64; // lambda * dt_fine
        let dt = 0.125f64;
        let lambda = w / dt;
        let model = probe_model(lambda);
        let mut t = two_level_tree(1);
        for rec in t.nodes.values_mut() {
            rec.q_n = smallvec![1.0];
        }
        let mut clock = LtClock { dt, n: 0 };
        lt_cycle(&mut t, &mut clock, &model, SchemeKind::MrltNerk3, None).unwrap();
        let fine = t.record(CellIndex::d1(2, 2)).q_n[0];
        let fine_expect = 1.0 + w + w * w / 2.0 + w.powi(3) / 12.0 + w.powi(4) / 24.0;
        assert!((fine - fine_expect).abs() < 1e-14, "fine {fine} vs {fine_expect}");
        let zc = 2.0 * w;
        let coarse = t.record(CellIndex::d1(1, 0)).q_n[0];
        let coarse_expect = 1.0
            + zc
            + zc * zc / 2.0
            + zc.powi(3) / 8.0
            + zc.powi(4) / 144.0
            + zc.powi(5) / 576.0;
        assert!(
            (coarse - coarse_expect).abs() < 1e-14,
            "coarse {coarse} vs {coarse_expect}"
        );
    }

    #[test]
    fn refresh_stage2_manufactured_linear_in_time() {
        // Leaf data linear in time, q(t) = t: after stage 1 with dt = 1 at
        // the fine level, children q* = 1, so the node mid-step value is 1
        // (= dt_fine) and its extrapolated q* is 2 - 0 = 2.
        let model = probe_model(0.0);
        let mut t = two_level_tree(1);
        for rec in t.nodes.values_mut() {
            rec.q_n = smallvec![0.0];
            rec.q_star = smallvec![0.0];
        }
        for f in [CellIndex::d1(2, 2), CellIndex::d1(2, 3)] {
            t.record_mut(f).q_star = smallvec![1.0];
        }
        t.record_mut(CellIndex::d1(1, 0)).q_star = smallvec![2.0];
        refresh_before_stage2(&mut t, &model, SchemeKind::MrltNerk2, 0).unwrap();
        let n = t.record(CellIndex::d1(1, 1));
        assert!((n.nerk_half[0] - 1.0).abs() < 1e-15, "children mean");
        assert!((n.q_star[0] - 2.0).abs() < 1e-15, "linear extrapolation");
        // virtual leaves of the coarse leaf predicted at t^n + dt_fine from
        // the coarse first-order midpoint (0 + 2)/2 = 1
        let v = t.record(CellIndex::d1(2, 0));
        assert!((v.q_star[0] - 1.0).abs() < 1e-14);
        assert!((v.nerk_half[0] - 0.5).abs() < 1e-14, "linear interpolation");
    }

    #[test]
    fn stage3_projection_rk3proj_end() {
        // Node with theta values linear in time: end = q^n + 2(3/4 - 1/4) = 1.
        let mut t = two_level_tree(1);
        {
            let n = t.record_mut(CellIndex::d1(1, 1));
            n.q_n = smallvec![0.0];
            n.nerk_quarter = smallvec![0.25];
            n.nerk_threequarter = smallvec![0.75];
        }
        for f in [CellIndex::d1(2, 2), CellIndex::d1(2, 3)] {
            t.record_mut(f).q_n = smallvec![0.9];
        }
        t.rebuild_lists();
        stage3_projection(&mut t, 1).unwrap();
        let n = t.record(CellIndex::d1(1, 1));
        assert!((n.nerk_half[0] - 1.0).abs() < 1e-15, "reconstructed end");
        assert!((n.q_dstar[0] - 0.9).abs() < 1e-15, "children-end mean");
    }

    #[test]
    fn lt_time_consistency_full_cycle() {
        let model = probe_model(-0.2);
        let mut t = two_level_tree(1);
        for rec in t.nodes.values_mut() {
            rec.q_n = smallvec![1.0];
        }
        let mut clock = LtClock { dt: 0.05, n: 0 };
        for _ in 0..2 {
            lt_cycle(&mut t, &mut clock, &model, SchemeKind::MrltNerk2, None).unwrap();
        }
        // after 2 iterations every leaf must sit at t = 2 dt
        for (idx, rec) in &t.nodes {
            if rec.kind == NodeKind::Leaf {
                assert_eq!(rec.clock, 2, "{}", idx.fmt_short(1));
            }
        }
    }

    #[test]
    fn lt_degenerates_to_mr_on_uniform_tree() {
        // On a uniform tree the LT cycle and the synchronous step must agree
        // bit for bit; use the Burgers model for a nonlinear check.
        let (model, _) = builtin_problems("burgers1d").unwrap();
        let level = 4u8;
        let mk = || {
            let mut t = GradedTree::new_uniform(
                1,
                level,
                level,
                model.lo,
                model.hi,
                model.periodic_flags(),
                1,
            );
            let leaves = t.all_leaves();
            for idx in leaves {
                let x = t.center(idx);
                let v = model.initial_condition(&x[..1]);
                t.record_mut(idx).q_n = v;
            }
            t
        };
        let dt = 1e-3;
        for (lt_scheme, mr_scheme) in [
            (SchemeKind::MrltNerk2, SchemeKind::MrRk2),
            (SchemeKind::MrltNerk3, SchemeKind::MrRk3),
        ] {
            let mut a = mk();
            let mut clock = LtClock { dt, n: 0 };
            for _ in 0..8 {
                lt_cycle(&mut a, &mut clock, &model, lt_scheme, None).unwrap();
            }
            let mut b = mk();
            for s in 0..8 {
                mr_step(&mut b, &model, mr_scheme, dt, s, None).unwrap();
            }
            for idx in a.all_leaves() {
                let va = a.record(idx).q_n[0];
                let vb = b.record(idx).q_n[0];
                assert!(
                    (va - vb).abs() <= 1e-13,
                    "{}: {va} vs {vb}",
                    idx.fmt_short(1)
                );
            }
        }
    }
}
