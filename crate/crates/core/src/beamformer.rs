//! Two-stage transmit precoders and receive combiners.
//!
//! The first stage nulls the inter-cell interference: BS `i` transmits in
//! the null space of its channel to user `prev(i)`, the only user it does
//! not serve. The second stage works on the effective channels
//! `H̄_{j,i} = H_{j,i} V_i^ICI` and handles the cross-message interference
//! at every user: `k_j` column pairs are chosen so that the two interfering
//! messages cancel inside the receive space, and the `w_j` leftover columns
//! of the larger message are sent into the null space of its effective
//! channel. The combiner then projects out the aligned directions.
//!
//! Every message is an interferer at exactly one user (own messages at the
//! next user, cross messages at the BS's own user), so each message block is
//! fixed by that user's alignment step. Randomness enters through the
//! choice of vectors inside each null space.

use crate::channel::ChannelSet;
use crate::network::{next, prev, DerivedQuantities, FeasibilityReport, NetworkConfig};
use crate::numerics::{self, complex_gaussian, ComplexMatrix, Tolerance};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

/// Redraws of the random null-space combinations before giving up.
pub const MAX_REDRAWS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("network is infeasible:\n{0}")]
    Infeasible(FeasibilityReport),
    #[error("ICI null space at BS {bs} has {available} dimensions, need {required}")]
    RankDeficient { bs: usize, available: usize, required: usize },
    #[error("alignment at user {user} needs {required} null-space dimensions, found {available}")]
    InfeasibleAlignment { user: usize, available: usize, required: usize },
    #[error("desired signal at user {user} has rank {rank} after combining, need {required}")]
    CombinerRankLoss { user: usize, rank: usize, required: usize },
    #[error("no full-rank design after {0} redraws")]
    RedrawLimit(usize),
}

/// Which channel estimate to evaluate a design against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChannelSelector {
    Known,
    True,
}

impl ChannelSelector {
    fn pick<'a>(&self, channels: &'a ChannelSet, user: usize, bs: usize) -> &'a ComplexMatrix {
        let link = channels.link(user, bs);
        match self {
            ChannelSelector::Known => &link.known_h,
            ChannelSelector::True => &link.true_h,
        }
    }
}

/// Effective channels `H̄_{j,i}` for the two serving BSs of each user.
#[derive(Debug, Clone)]
pub struct EffectiveChannels {
    /// `from_prev[j] = H_{j,prev(j)} V_{prev(j)}^ICI`.
    pub from_prev: Vec<ComplexMatrix>,
    /// `from_own[j] = H_{j,j} V_j^ICI`.
    pub from_own: Vec<ComplexMatrix>,
}

impl EffectiveChannels {
    pub fn get(&self, user: usize, bs: usize) -> &ComplexMatrix {
        let cells = self.from_own.len();
        if bs == user {
            &self.from_own[user]
        } else if bs == prev(user, cells) {
            &self.from_prev[user]
        } else {
            panic!("BS {bs} does not serve user {user}")
        }
    }
}

/// Second-stage blocks per BS: own message then cross message, each
/// `Q_i x d[i][.]`.
#[derive(Debug, Clone)]
pub struct XciBlocks {
    pub own: Vec<ComplexMatrix>,
    pub cross: Vec<ComplexMatrix>,
}

#[derive(Debug, Clone)]
pub struct BeamformerSet {
    /// `M_i x Q_i` ICI-nulling bases.
    pub v_ici: Vec<ComplexMatrix>,
    pub v_xci: XciBlocks,
    /// Composed `M_i x d_i` precoders `[own | cross]`, unit trace power.
    pub v_full: Vec<ComplexMatrix>,
    /// `N_j x d^[j]` combiners with orthonormal columns.
    pub u: Vec<ComplexMatrix>,
    /// Redraws spent before the design was accepted.
    pub redraws: usize,
}

impl BeamformerSet {
    pub fn cells(&self) -> usize {
        self.v_full.len()
    }

    /// Columns of `V_bs` carrying the message for `user`.
    pub fn message(&self, bs: usize, user: usize) -> ComplexMatrix {
        let cells = self.cells();
        let own = self.v_xci.own[bs].ncols();
        let v = &self.v_full[bs];
        if user == bs {
            v.columns(0, own).into_owned()
        } else if user == next(bs, cells) {
            v.columns(own, v.ncols() - own).into_owned()
        } else {
            ComplexMatrix::zeros(v.nrows(), 0)
        }
    }
}

fn orthonormalize(m: ComplexMatrix) -> ComplexMatrix {
    if m.ncols() == 0 {
        return m;
    }
    m.qr().q()
}

/// `count` orthonormal columns drawn as a random combination of `basis`.
fn random_subspace<R: Rng + ?Sized>(basis: &ComplexMatrix, count: usize, rng: &mut R) -> ComplexMatrix {
    if count == 0 {
        return ComplexMatrix::zeros(basis.nrows(), 0);
    }
    let g = complex_gaussian(basis.ncols(), count, 1.0, rng);
    orthonormalize(basis * g)
}

/// Only the direction of a paired column matters to the combiner, so each
/// one is rescaled to unit norm to spread power evenly over streams.
fn unit_columns(mut m: ComplexMatrix) -> ComplexMatrix {
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c.unscale_mut(n);
        }
    }
    m
}

fn hcat(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = ComplexMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Null-space bases of each BS's channel to user `prev(i)`, truncated to
/// `Q_i` columns.
pub fn design_ici(known: &ChannelSet, config: &NetworkConfig, tol: &Tolerance) -> Result<Vec<ComplexMatrix>, DesignError> {
    let cells = config.cells;
    let dq = config.derive();
    (0..cells)
        .map(|i| {
            let h = &known.link(prev(i, cells), i).known_h;
            let ns = numerics::null_space(h, tol);
            if ns.ncols() < dq.q[i] {
                return Err(DesignError::RankDeficient {
                    bs: i,
                    available: ns.ncols(),
                    required: dq.q[i],
                });
            }
            Ok(ns.columns(0, dq.q[i]).into_owned())
        })
        .collect()
}

pub fn effective_channels(known: &ChannelSet, ici: &[ComplexMatrix]) -> EffectiveChannels {
    let cells = ici.len();
    let from_prev = (0..cells)
        .map(|j| {
            let p = prev(j, cells);
            &known.link(j, p).known_h * &ici[p]
        })
        .collect();
    let from_own = (0..cells).map(|j| &known.link(j, j).known_h * &ici[j]).collect();
    EffectiveChannels { from_prev, from_own }
}

/// Alignment blocks for every message.
///
/// At user `j` the interferers are `a` = own message of `prev(j)` and `b` =
/// cross message of BS `j`. Paired columns satisfy
/// `H̄_{j,prev(j)} v_a ∝ H̄_{j,j} v_b`; they come first in each block.
pub fn design_xci<R: Rng + ?Sized>(
    eff: &EffectiveChannels,
    config: &NetworkConfig,
    dq: &DerivedQuantities,
    rng: &mut R,
    tol: &Tolerance,
) -> Result<XciBlocks, DesignError> {
    let cells = config.cells;
    let mut own: Vec<Option<ComplexMatrix>> = vec![None; cells];
    let mut cross: Vec<Option<ComplexMatrix>> = vec![None; cells];

    for j in 0..cells {
        let p = prev(j, cells);
        let ha = eff.get(j, p);
        let hb = eff.get(j, j);
        let (qa, qb) = (ha.ncols(), hb.ncols());
        let da = config.demand.get(p, p);
        let db = config.demand.get(j, next(j, cells));
        let k = dq.k[j];
        let w = dq.w[j];

        let (mut va, mut vb) = (ComplexMatrix::zeros(qa, k), ComplexMatrix::zeros(qb, k));
        if k > 0 {
            let joint = numerics::null_space(&hcat(ha, hb), tol);
            if joint.ncols() < k {
                return Err(DesignError::InfeasibleAlignment {
                    user: j,
                    available: joint.ncols(),
                    required: k,
                });
            }
            let pairs = random_subspace(&joint, k, rng);
            va = unit_columns(pairs.rows(0, qa).into_owned());
            vb = unit_columns(pairs.rows(qa, qb).into_owned());
        }

        if w > 0 {
            let (hx, larger_is_a) = if da > db { (ha, true) } else { (hb, false) };
            let ns = numerics::null_space(hx, tol);
            if ns.ncols() < w {
                return Err(DesignError::InfeasibleAlignment {
                    user: j,
                    available: ns.ncols(),
                    required: w,
                });
            }
            let extra = random_subspace(&ns, w, rng);
            if larger_is_a {
                va = hcat(&va, &extra);
            } else {
                vb = hcat(&vb, &extra);
            }
        }
        debug_assert_eq!((va.ncols(), vb.ncols()), (da, db));
        own[p] = Some(va);
        cross[j] = Some(vb);
    }

    Ok(XciBlocks {
        own: own.into_iter().map(|b| b.expect("every own message is assigned")).collect(),
        cross: cross.into_iter().map(|b| b.expect("every cross message is assigned")).collect(),
    })
}

/// Combiners that annihilate the aligned interference and keep the full
/// desired rank.
pub fn design_combiner(
    eff: &EffectiveChannels,
    xci: &XciBlocks,
    config: &NetworkConfig,
    tol: &Tolerance,
) -> Result<Vec<ComplexMatrix>, DesignError> {
    let cells = config.cells;
    let dq = config.derive();
    (0..cells)
        .map(|j| {
            let p = prev(j, cells);
            let n = config.n_rx[j];
            // Nulled columns arrive as zero, so only the aligned pairs occupy
            // receive dimensions.
            let aligned = eff.get(j, p) * xci.own[p].columns(0, dq.k[j]);
            let desired = hcat(&(eff.get(j, p) * &xci.cross[p]), &(eff.get(j, j) * &xci.own[j]));
            let d = desired.ncols();
            if d == 0 {
                return Ok(ComplexMatrix::zeros(n, 0));
            }
            let free = if aligned.ncols() == 0 {
                ComplexMatrix::identity(n, n)
            } else {
                numerics::left_null_space(&aligned, tol)
            };
            let projected = free.adjoint() * &desired;
            let rank = numerics::rank_of(&projected, tol);
            if rank < d {
                return Err(DesignError::CombinerRankLoss { user: j, rank, required: d });
            }
            let basis = numerics::column_space(&projected, tol);
            Ok(&free * basis.columns(0, d))
        })
        .collect()
}

/// Full design with the redraw loop on rank loss.
pub fn design<R: Rng + ?Sized>(
    known: &ChannelSet,
    config: &NetworkConfig,
    rng: &mut R,
    tol: &Tolerance,
) -> Result<BeamformerSet, DesignError> {
    let report = config.check_feasibility();
    if !report.passed() {
        return Err(DesignError::Infeasible(report));
    }
    let dq = config.derive();
    let v_ici = design_ici(known, config, tol)?;
    let eff = effective_channels(known, &v_ici);

    for attempt in 0..MAX_REDRAWS {
        let xci = design_xci(&eff, config, &dq, rng, tol)?;
        let u = match design_combiner(&eff, &xci, config, tol) {
            Ok(u) => u,
            Err(DesignError::CombinerRankLoss { .. }) => continue,
            Err(e) => return Err(e),
        };
        let v_full = compose(&v_ici, &xci);
        if v_full.iter().zip(&dq.d_tx).any(|(v, &d)| numerics::rank_of(v, tol) < d) {
            continue;
        }
        return Ok(BeamformerSet {
            v_ici,
            v_xci: xci,
            v_full,
            u,
            redraws: attempt,
        });
    }
    Err(DesignError::RedrawLimit(MAX_REDRAWS))
}

/// `V_i = c V_i^ICI [own | cross]` with `c` chosen for unit trace power.
fn compose(v_ici: &[ComplexMatrix], xci: &XciBlocks) -> Vec<ComplexMatrix> {
    v_ici
        .iter()
        .enumerate()
        .map(|(i, ici)| {
            let v = ici * hcat(&xci.own[i], &xci.cross[i]);
            let p = numerics::power(&v);
            if v.ncols() == 0 || p == 0.0 {
                v
            } else {
                v.unscale(p.sqrt())
            }
        })
        .collect()
}

/// Residuals of the zero-forcing conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    /// Largest `||U_j^H H_{j,l} V_l|| / (||H_{j,l}|| ||V_l||)` over
    /// non-serving BSs `l`.
    pub ici_residual: f64,
    /// Largest relative norm of the combined undesired-message terms.
    pub xci_residual: f64,
    pub desired_rank: Vec<usize>,
    pub required_rank: Vec<usize>,
    pub passed: bool,
}

fn relative(residual: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        0.0
    } else {
        residual / scale
    }
}

pub fn verify_alignment(
    channels: &ChannelSet,
    selector: ChannelSelector,
    bf: &BeamformerSet,
    config: &NetworkConfig,
    tol: &Tolerance,
) -> AlignmentReport {
    let cells = config.cells;
    let dq = config.derive();
    let mut ici_residual: f64 = 0.0;
    let mut xci_residual: f64 = 0.0;
    let mut desired_rank = Vec::with_capacity(cells);

    for j in 0..cells {
        let u = &bf.u[j];
        let p = prev(j, cells);
        for l in (0..cells).filter(|&l| l != j && l != p) {
            let h = selector.pick(channels, j, l);
            let v = &bf.v_full[l];
            let r = numerics::spectral_norm(&(u.adjoint() * h * v));
            ici_residual = ici_residual.max(relative(r, numerics::spectral_norm(h) * numerics::spectral_norm(v)));
        }

        let hp = selector.pick(channels, j, p);
        let hj = selector.pick(channels, j, j);
        let va = bf.message(p, p);
        let vb = bf.message(j, next(j, cells));
        let leak = u.adjoint() * (hcat(&(hp * &va), &(hj * &vb)));
        let scale = (numerics::spectral_norm(hp) * numerics::spectral_norm(&va))
            .max(numerics::spectral_norm(hj) * numerics::spectral_norm(&vb));
        xci_residual = xci_residual.max(relative(numerics::spectral_norm(&leak), scale));

        let desired = u.adjoint() * hcat(&(hp * bf.message(p, j)), &(hj * bf.message(j, j)));
        desired_rank.push(numerics::rank_of(&desired, tol));
    }

    let passed = ici_residual <= tol.zero_eps && xci_residual <= tol.zero_eps && desired_rank == dq.d_rx;
    AlignmentReport {
        ici_residual,
        xci_residual,
        desired_rank,
        required_rank: dq.d_rx,
        passed,
    }
}
