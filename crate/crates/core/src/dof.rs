//! Degrees-of-freedom analysis for the three-cell, overlap-2 network.
//!
//! Three pieces live here: the closed-form maximum of the outer-bound
//! program ([`proposition1`]), an exhaustive integer search over the same
//! constraint set plus the alignment conditions ([`enumerate_outer`]), and
//! the minimum-antenna planner ([`plan_antennas`]).
//!
//! Stream variables are ordered `(d[0][0], d[0][1], d[1][1], d[1][2],
//! d[2][2], d[2][0])`, i.e. own then cross message for each BS.

use crate::network::{interferer_streams, next, prev, DemandMatrix, NetworkConfig};
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

const CELLS: usize = 3;

/// How the union constraint of the outer bound is read. For BS `i` and a
/// user `j` it serves, the streams that either go to user `j` or leave BS
/// `i` are counted once each and must fit in `max(N_j, Q_i)`. This reading
/// regenerates every pairwise and fractional term of the closed form.
pub const SUBEQ7_INTERPRETATION: &str =
    "|streams to user j  U  streams from BS i| <= max(N_j, Q_i) for every BS i and served user j";

/// How the receive-antenna constraint is read: the `+1` of the aligned
/// interference dimension becomes `+max(1, k_j)` so that more than one
/// aligned pair reserves more than one dimension.
pub const SUBEQ2_INTERPRETATION: &str = "d^[j] + max(1, k_j) <= N_j";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DofError {
    #[error("search bound {bound} is too small: the maximiser touches the box at BS {bs}")]
    BoundTooSmall { bound: usize, bs: usize },
    #[error("only the three-cell, overlap-2 network is supported")]
    Unsupported,
    #[error("demand matrix is not valid: {0}")]
    InvalidDemand(String),
}

/// Outer-bound program data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct DofProblem {
    pub q: [usize; CELLS],
    pub n: [usize; CELLS],
}

impl DofProblem {
    pub fn new(q: [usize; CELLS], n: [usize; CELLS]) -> Self {
        DofProblem { q, n }
    }

    pub fn from_config(config: &NetworkConfig) -> Result<Self, DofError> {
        if config.cells != CELLS || config.overlap != 2 {
            return Err(DofError::Unsupported);
        }
        let dq = config.derive();
        Ok(DofProblem {
            q: [dq.q[0], dq.q[1], dq.q[2]],
            n: [config.n_rx[0], config.n_rx[1], config.n_rx[2]],
        })
    }

    /// Relabels cell `i` as `i + 1`.
    pub fn rotated(&self) -> Self {
        DofProblem {
            q: [self.q[2], self.q[0], self.q[1]],
            n: [self.n[2], self.n[0], self.n[1]],
        }
    }
}

/// All 21 terms of the closed-form DoF, in order.
pub fn proposition1_terms(q: [usize; CELLS], n: [usize; CELLS]) -> [f64; 21] {
    let [q1, q2, q3] = q.map(|x| x as f64);
    let [n1, n2, n3] = n.map(|x| x as f64);
    let m11 = n1.max(q1);
    let m13 = n1.max(q3);
    let m21 = n2.max(q1);
    let m22 = n2.max(q2);
    let m32 = n3.max(q2);
    let m33 = n3.max(q3);
    let sq = q1 + q2 + q3;
    let sn = n1 + n2 + n3;
    [
        sq,
        sn - 3.0,
        m11 + m32,
        m13 + m22,
        m21 + m33,
        (m11 + m13 + m32 + m22) / 2.0,
        (m13 + m21 + m33 + m22) / 2.0,
        (m11 + m21 + m32 + m33) / 2.0,
        (m11 + m13 + q2 + n2 + n3) / 2.0 - 1.0,
        (m11 + m21 + q2 + q3 + n3 - 1.0) / 2.0,
        (m11 + m32 + sq) / 2.0,
        (m11 + m32 + sn - 1.0) / 2.0 - 1.0,
        (m13 + m22 + sq) / 2.0,
        (m13 + m22 + sn - 1.0) / 2.0 - 1.0,
        (m13 + m33 + q1 + q2 + n2 - 1.0) / 2.0,
        (m21 + m22 + q3 + n1 + n3) / 2.0 - 1.0,
        (m21 + m33 + sq) / 2.0,
        (m21 + m33 + sn - 1.0) / 2.0 - 1.0,
        (m22 + m32 + q1 + q3 + n1 - 1.0) / 2.0,
        (m32 + m33 + q1 + n1 + n2) / 2.0 - 1.0,
        (m11 + m13 + m21) / 3.0 + (m22 + m32 + m33) / 3.0,
    ]
}

/// Minimum over the 21 terms, before integer rounding.
pub fn proposition1_continuous(q: [usize; CELLS], n: [usize; CELLS]) -> f64 {
    proposition1_terms(q, n).into_iter().fold(f64::INFINITY, f64::min)
}

/// One-based indices of the terms attaining the minimum.
pub fn proposition1_binding(q: [usize; CELLS], n: [usize; CELLS]) -> Vec<usize> {
    let terms = proposition1_terms(q, n);
    let min = proposition1_continuous(q, n);
    terms
        .iter()
        .enumerate()
        .filter(|(_, &t)| (t - min).abs() < 1e-9)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Closed-form total DoF: `floor` of the minimum term, clamped at zero.
pub fn proposition1(q: [usize; CELLS], n: [usize; CELLS]) -> usize {
    let v = proposition1_continuous(q, n);
    // Terms are multiples of 1/6; the offset absorbs rounding in the thirds.
    (v + 1e-9).floor().max(0.0) as usize
}

/// One evaluated outer-bound or alignment constraint, `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstraintValue {
    pub label: String,
    pub lhs: usize,
    pub rhs: usize,
}

impl ConstraintValue {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Streams to `user` or from `bs`, each message counted once.
pub fn union_streams(demand: &DemandMatrix, bs: usize, user: usize) -> usize {
    let mut msgs = BTreeSet::new();
    for i in 0..CELLS {
        if demand.get(i, user) > 0 {
            msgs.insert((i, user));
        }
    }
    for j in 0..CELLS {
        if demand.get(bs, j) > 0 {
            msgs.insert((bs, j));
        }
    }
    msgs.into_iter().map(|(i, j)| demand.get(i, j)).sum()
}

/// Every constraint enforced by [`enumerate_outer`], evaluated at `demand`.
///
/// A user that can separate all incoming streams on its own antennas
/// (`direct`) needs no alignment. Otherwise the nulling and joint-alignment
/// conditions are checked at the receive dimension the scheme actually
/// uses, `d^[j] + max(1, k_j)`; a receiver may ignore spare antennas.
pub fn outer_constraints(problem: &DofProblem, demand: &DemandMatrix) -> Vec<ConstraintValue> {
    let q = problem.q;
    let n = problem.n;
    let mut out = Vec::with_capacity(18);
    for i in 0..CELLS {
        out.push(ConstraintValue {
            label: format!("subeq1[{}]", i + 1),
            lhs: demand.own(i) + demand.cross(i),
            rhs: q[i],
        });
    }
    for j in 0..CELLS {
        let (a, b) = interferer_streams(demand, j);
        let k = a.min(b);
        let d_rx = demand.get(prev(j, CELLS), j) + demand.get(j, j);
        out.push(ConstraintValue {
            label: format!("subeq2[{}]", j + 1),
            lhs: d_rx + k.max(1),
            rhs: n[j],
        });
    }
    for i in 0..CELLS {
        for j in [i, next(i, CELLS)] {
            out.push(ConstraintValue {
                label: format!("subeq7[{},{}]", i + 1, j + 1),
                lhs: union_streams(demand, i, j),
                rhs: n[j].max(q[i]),
            });
        }
    }
    for j in 0..CELLS {
        let (a, b) = interferer_streams(demand, j);
        let k = a.min(b);
        let w = a.max(b) - k;
        let d_rx = demand.get(prev(j, CELLS), j) + demand.get(j, j);
        if d_rx + a + b <= n[j] {
            out.push(ConstraintValue {
                label: format!("direct[{}]", j + 1),
                lhs: d_rx + a + b,
                rhs: n[j],
            });
            continue;
        }
        let n_eff = d_rx + k.max(1);
        if w > 0 {
            let x = if a >= b { prev(j, CELLS) } else { j };
            out.push(ConstraintValue {
                label: format!("nulling[{}]", j + 1),
                lhs: w + n_eff,
                rhs: q[x],
            });
        }
        if k > 0 {
            out.push(ConstraintValue {
                label: format!("joint[{}]", j + 1),
                lhs: k + n_eff,
                rhs: q[prev(j, CELLS)] + q[j],
            });
        }
    }
    out
}

/// Allocation-free form of `outer_constraints(..).all(holds)` for the
/// search loop.
fn allocation_feasible(problem: &DofProblem, own: [usize; CELLS], cross: [usize; CELLS]) -> bool {
    let (q, n) = (problem.q, problem.n);
    for i in 0..CELLS {
        if own[i] + cross[i] > q[i] {
            return false;
        }
    }
    for j in 0..CELLS {
        let p = prev(j, CELLS);
        let nx = next(j, CELLS);
        let d_rx = cross[p] + own[j];
        let (a, b) = (own[p], cross[j]);
        let k = a.min(b);
        let w = a.max(b) - k;
        if d_rx + k.max(1) > n[j] {
            return false;
        }
        // BS j with its own user, and BS j with the next user.
        if cross[p] + own[j] + cross[j] > n[j].max(q[j]) || own[j] + cross[j] + own[nx] > n[nx].max(q[j]) {
            return false;
        }
        if d_rx + a + b <= n[j] {
            continue;
        }
        let n_eff = d_rx + k.max(1);
        if w > 0 && w + n_eff > q[if a >= b { p } else { j }] {
            return false;
        }
        if k > 0 && k + n_eff > q[p] + q[j] {
            return false;
        }
    }
    true
}

/// Maximiser of the outer-bound program over integer stream counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DofSolution {
    pub total: usize,
    pub allocation: DemandMatrix,
    /// Constraints holding with equality at the maximiser.
    pub binding: Vec<String>,
}

/// Exhaustive search over `d[i][j] in 0..=bound`. Returns the
/// lexicographically smallest maximiser.
pub fn enumerate_outer(problem: &DofProblem, bound: usize) -> Result<DofSolution, DofError> {
    let q = problem.q;
    let mut best: Option<([usize; 6], usize)> = None;
    let caps: [usize; CELLS] = [0, 1, 2].map(|i| q[i].min(bound));
    for o0 in 0..=caps[0] {
        for c0 in 0..=(caps[0] - o0).min(bound) {
            for o1 in 0..=caps[1] {
                for c1 in 0..=(caps[1] - o1).min(bound) {
                    for o2 in 0..=caps[2] {
                        for c2 in 0..=(caps[2] - o2).min(bound) {
                            let total = o0 + c0 + o1 + c1 + o2 + c2;
                            if best.is_some_and(|(_, t)| total <= t) {
                                continue;
                            }
                            if allocation_feasible(problem, [o0, o1, o2], [c0, c1, c2]) {
                                best = Some(([o0, c0, o1, c1, o2, c2], total));
                            }
                        }
                    }
                }
            }
        }
    }
    let (v, total) = best.unwrap_or(([0; 6], 0));
    for (idx, &x) in v.iter().enumerate() {
        let bs = idx / 2;
        if x == bound && bound < q[bs] {
            return Err(DofError::BoundTooSmall { bound, bs });
        }
    }
    let allocation = DemandMatrix::from_own_cross(&[v[0], v[2], v[4]], &[v[1], v[3], v[5]]);
    let binding = outer_constraints(problem, &allocation)
        .into_iter()
        .filter(|c| c.lhs == c.rhs)
        .map(|c| c.label)
        .collect();
    Ok(DofSolution {
        total,
        allocation,
        binding,
    })
}

/// Default search box: one past the largest precoder dimension.
pub fn default_bound(problem: &DofProblem) -> usize {
    problem.q.iter().copied().max().unwrap_or(0) + 1
}

/// One update made by the antenna planner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum PlanStep {
    /// The union count of BS `bs` and served user `user` exceeded
    /// `max(N_user, Q_bs)`; `Q_bs` was raised to the union count.
    UnionCapacity { bs: usize, user: usize, union: usize, from: usize, to: usize },
    /// Residual nulling at `user` needs `Q_bar = w + N_user` dimensions at
    /// BS `raised`.
    ResidualNulling { user: usize, t: usize, q_bar: usize, raised: usize, from: usize, to: usize },
}

/// Minimum antenna configuration for a demand matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AntennaPlan {
    pub q_final: Vec<usize>,
    pub n_rx: Vec<usize>,
    pub m_tx: Vec<usize>,
    pub trace: Vec<PlanStep>,
}

impl AntennaPlan {
    pub fn to_config(&self, demand: &DemandMatrix) -> NetworkConfig {
        NetworkConfig {
            cells: CELLS,
            overlap: 2,
            users_per_cell: 1,
            m_tx: self.m_tx.clone(),
            n_rx: self.n_rx.clone(),
            demand: demand.clone(),
        }
    }
}

/// Computes the smallest `(M, N)` that carries `demand` with the closed-form
/// alignment scheme.
pub fn plan_antennas(demand: &DemandMatrix, cells: usize, overlap: usize) -> Result<AntennaPlan, DofError> {
    if cells != CELLS || overlap != 2 {
        return Err(DofError::Unsupported);
    }
    let probe = NetworkConfig {
        cells,
        overlap,
        users_per_cell: 1,
        m_tx: vec![1; cells],
        n_rx: vec![1; cells],
        demand: demand.clone(),
    };
    if let Err(v) = probe.validate() {
        let msg: Vec<String> = v.iter().map(ToString::to_string).collect();
        return Err(DofError::InvalidDemand(msg.join("; ")));
    }
    let dq = probe.derive();
    let n_rx: Vec<usize> = (0..cells).map(|j| (dq.d_rx[j] + dq.k[j]).max(1)).collect();
    let mut q = dq.d_tx.clone();
    let mut trace = Vec::new();

    for j in 0..cells {
        for i in [prev(j, cells), j] {
            let union = union_streams(demand, i, j);
            if union > n_rx[j].max(q[i]) {
                trace.push(PlanStep::UnionCapacity {
                    bs: i,
                    user: j,
                    union,
                    from: q[i],
                    to: union,
                });
                q[i] = union;
            }
        }
    }

    for j in 0..cells {
        let w = dq.w[j];
        if w == 0 {
            continue;
        }
        let t = dq.victim_bs[j];
        let q_bar = w + n_rx[j];
        let raised = if t == j { j } else { prev(j, cells) };
        if q_bar > q[raised] {
            trace.push(PlanStep::ResidualNulling {
                user: j,
                t,
                q_bar,
                raised,
                from: q[raised],
                to: q_bar,
            });
            q[raised] = q_bar;
        }
    }

    let m_tx = (0..cells).map(|i| q[i] + n_rx[prev(i, cells)]).collect();
    Ok(AntennaPlan {
        q_final: q,
        n_rx,
        m_tx,
        trace,
    })
}

/// High-SNR DoF estimate `sum_rate / log2(snr)`.
pub fn dof_estimate(sum_rate_bits: f64, snr_linear: f64) -> f64 {
    sum_rate_bits / snr_linear.log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_problem() -> DofProblem {
        DofProblem::from_config(&NetworkConfig::three_cell_mixed(10)).unwrap()
    }

    #[test]
    fn closed_form_on_reference_instance() {
        let p = reference_problem();
        assert_eq!((p.q, p.n), ([5, 7, 6], [3, 4, 5]));
        let terms = proposition1_terms(p.q, p.n);
        // Hand evaluation of the 21 terms.
        let expected = [
            18.0, 9.0, 12.0, 13.0, 11.0, 12.5, 12.0, 11.5, 12.5, 13.5, 15.0, 10.5, 15.5, 11.0, 13.5, 12.0, 14.5, 10.0,
            13.5, 11.5, 12.0,
        ];
        for (t, e) in terms.iter().zip(expected) {
            assert!((t - e).abs() < 1e-12, "{terms:?}");
        }
        assert_eq!(proposition1(p.q, p.n), 9);
        assert_eq!(proposition1_binding(p.q, p.n), vec![2]);
    }

    #[test]
    fn closed_form_limits() {
        assert_eq!(proposition1([5, 7, 6], [1_000_000; 3]), 18);
        assert_eq!(proposition1([0, 0, 0], [4, 9, 2]), 0);
        assert_eq!(proposition1([3, 3, 3], [0, 0, 0]), 0);
    }

    #[test]
    fn enumeration_on_reference_instance() {
        let sol = enumerate_outer(&reference_problem(), 7).unwrap();
        assert_eq!(sol.total, 9);
        assert_eq!(sol.allocation.total(), 9);
        assert!(sol.binding.iter().any(|b| b.starts_with("subeq2")));
    }

    #[test]
    fn enumeration_degenerate_and_transmit_limited() {
        let sol = enumerate_outer(&DofProblem::new([0, 0, 0], [3, 4, 5]), 1).unwrap();
        assert_eq!(sol.total, 0);
        assert_eq!(sol.allocation, DemandMatrix::zeros(3));

        let sol = enumerate_outer(&DofProblem::new([2, 2, 2], [10, 10, 10]), 4).unwrap();
        assert_eq!(sol.total, 6);
    }

    #[test]
    fn bound_too_small_is_reported() {
        let p = DofProblem::new([2, 2, 2], [10, 10, 10]);
        assert!(matches!(enumerate_outer(&p, 1), Err(DofError::BoundTooSmall { .. })));
    }

    #[test]
    fn plan_for_reference_demand() {
        let demand = DemandMatrix::from_own_cross(&[1, 2, 3], &[1, 1, 1]);
        let plan = plan_antennas(&demand, 3, 2).unwrap();
        assert_eq!(plan.n_rx, vec![3, 4, 5]);
        assert_eq!(plan.q_final, vec![2, 6, 5]);
        assert_eq!(plan.m_tx, vec![7, 9, 9]);
        assert!(plan.to_config(&demand).check_feasibility().passed());
    }

    #[test]
    fn plan_for_uniform_demand_makes_no_updates() {
        let demand = DemandMatrix::from_own_cross(&[1, 1, 1], &[1, 1, 1]);
        let plan = plan_antennas(&demand, 3, 2).unwrap();
        assert!(plan.trace.is_empty());
        assert_eq!((plan.n_rx.clone(), plan.q_final.clone(), plan.m_tx.clone()), (vec![3; 3], vec![2; 3], vec![5; 3]));
    }

    #[test]
    fn plan_for_empty_network() {
        let plan = plan_antennas(&DemandMatrix::zeros(3), 3, 2).unwrap();
        assert_eq!(plan.n_rx, vec![1; 3]);
        assert_eq!(plan.q_final, vec![0; 3]);
        assert_eq!(plan.m_tx, vec![1; 3]);
    }

    #[test]
    fn plan_rejects_bad_shapes() {
        assert_eq!(plan_antennas(&DemandMatrix::zeros(4), 4, 2), Err(DofError::Unsupported));
        let mut d = DemandMatrix::zeros(3);
        d.set(0, 2, 1);
        assert!(matches!(plan_antennas(&d, 3, 2), Err(DofError::InvalidDemand(_))));
    }

    #[test]
    fn dof_estimate_arithmetic() {
        assert_eq!(dof_estimate(90.0, 1024.0), 9.0);
        assert_eq!(dof_estimate(0.0, 1000.0), 0.0);
    }

    proptest! {
        #[test]
        fn closed_form_is_monotone(q in prop::array::uniform3(0usize..12), n in prop::array::uniform3(0usize..12), idx in 0usize..6) {
            let base = proposition1_continuous(q, n);
            let (mut q2, mut n2) = (q, n);
            if idx < 3 { q2[idx] += 1 } else { n2[idx - 3] += 1 }
            prop_assert!(proposition1_continuous(q2, n2) >= base);
        }

        #[test]
        fn enumeration_is_cyclically_covariant(q in prop::array::uniform3(0usize..6), n in prop::array::uniform3(1usize..7)) {
            let p = DofProblem::new(q, n);
            let a = enumerate_outer(&p, default_bound(&p)).unwrap().total;
            let r = p.rotated();
            let b = enumerate_outer(&r, default_bound(&r)).unwrap().total;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn fast_check_matches_labelled_constraints(
            q in prop::array::uniform3(0usize..7),
            n in prop::array::uniform3(0usize..7),
            own in prop::array::uniform3(0usize..5),
            cross in prop::array::uniform3(0usize..5),
        ) {
            let p = DofProblem::new(q, n);
            let d = DemandMatrix::from_own_cross(&own, &cross);
            let slow = outer_constraints(&p, &d).iter().all(ConstraintValue::holds);
            prop_assert_eq!(allocation_feasible(&p, own, cross), slow);
        }

        #[test]
        fn closed_form_bounds_enumeration(q in prop::array::uniform3(0usize..7), n in prop::array::uniform3(0usize..7)) {
            let p = DofProblem::new(q, n);
            let sol = enumerate_outer(&p, default_bound(&p)).unwrap();
            prop_assert!(proposition1(q, n) >= sol.total);
        }

        #[test]
        fn plans_are_feasible(own in prop::array::uniform3(0usize..5), cross in prop::array::uniform3(0usize..5)) {
            let demand = DemandMatrix::from_own_cross(&own, &cross);
            let plan = plan_antennas(&demand, 3, 2).unwrap();
            let cfg = plan.to_config(&demand);
            prop_assert!(cfg.check_feasibility().passed(), "{}", cfg.check_feasibility());
            prop_assert_eq!(cfg.derive().q, plan.q_final.clone());
        }
    }
}
