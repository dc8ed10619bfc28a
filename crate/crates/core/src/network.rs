//! Cell, antenna and stream bookkeeping.
//!
//! With overlap 2 every BS `i` carries two messages: its own message to user
//! `i` and a cross message to user `i + 1`. User `j` therefore sees the two
//! desired messages `(j-1 -> j)` and `(j -> j)`, the two XCI messages
//! `(j-1 -> j-1)` and `(j -> j+1)`, and ICI from every other BS.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Circular index on `1..=big_l`: returns `big_l` when `l` is a multiple of
/// `big_l`, otherwise `l mod big_l`.
pub fn circ(l: i64, big_l: usize) -> usize {
    assert!(big_l >= 1, "cell count must be positive");
    let m = l.rem_euclid(big_l as i64) as usize;
    if m == 0 {
        big_l
    } else {
        m
    }
}

/// Zero-based wraparound of `i + offset` on `0..cells`.
pub fn wrap(i: usize, offset: i64, cells: usize) -> usize {
    circ(i as i64 + 1 + offset, cells) - 1
}

pub fn prev(i: usize, cells: usize) -> usize {
    wrap(i, -1, cells)
}

pub fn next(i: usize, cells: usize) -> usize {
    wrap(i, 1, cells)
}

/// Stream counts `demand[i][j]` from BS `i` to user `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandMatrix(Vec<Vec<usize>>);

impl DemandMatrix {
    pub fn new(rows: Vec<Vec<usize>>) -> Self {
        DemandMatrix(rows)
    }

    pub fn zeros(cells: usize) -> Self {
        DemandMatrix(vec![vec![0; cells]; cells])
    }

    /// Own and cross messages per BS for overlap 2: `own[i] = d[i][i]`,
    /// `cross[i] = d[i][i+1]`.
    pub fn from_own_cross(own: &[usize], cross: &[usize]) -> Self {
        assert_eq!(own.len(), cross.len());
        let cells = own.len();
        let mut d = Self::zeros(cells);
        for i in 0..cells {
            d.0[i][i] = own[i];
            let j = next(i, cells);
            d.0[i][j] += cross[i];
        }
        d
    }

    pub fn get(&self, bs: usize, user: usize) -> usize {
        self.0[bs][user]
    }

    pub fn set(&mut self, bs: usize, user: usize, streams: usize) {
        self.0[bs][user] = streams;
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.0
    }

    pub fn own(&self, bs: usize) -> usize {
        self.0[bs][bs]
    }

    pub fn cross(&self, bs: usize) -> usize {
        self.0[bs][next(bs, self.0.len())]
    }

    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }
}

/// Network configuration `(M_i, N_i, users per cell, L, d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub cells: usize,
    /// Number of BSs serving each overlapped user.
    #[serde(default = "default_overlap")]
    pub overlap: usize,
    #[serde(default = "default_users_per_cell")]
    pub users_per_cell: usize,
    pub m_tx: Vec<usize>,
    pub n_rx: Vec<usize>,
    pub demand: DemandMatrix,
}

fn default_overlap() -> usize {
    2
}

fn default_users_per_cell() -> usize {
    1
}

/// One violated structural invariant of a [`NetworkConfig`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigViolation {
    OverlapRange { overlap: usize, cells: usize },
    UnsupportedOverlap(usize),
    UsersPerCell(usize),
    Length { field: &'static str, expected: usize, got: usize },
    ZeroAntennas { field: &'static str, index: usize },
    OutOfPattern { bs: usize, user: usize, streams: usize },
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigViolation::OverlapRange { overlap, cells } => {
                write!(f, "overlap must satisfy 1 < overlap < cells (overlap = {overlap}, cells = {cells})")
            }
            ConfigViolation::UnsupportedOverlap(o) => write!(f, "only overlap 2 is supported (got {o})"),
            ConfigViolation::UsersPerCell(k) => write!(f, "only one overlapped user per cell is supported (got {k})"),
            ConfigViolation::Length { field, expected, got } => {
                write!(f, "{field} must have {expected} entries (got {got})")
            }
            ConfigViolation::ZeroAntennas { field, index } => {
                write!(f, "{field}[{}] must be at least 1", index + 1)
            }
            ConfigViolation::OutOfPattern { bs, user, streams } => write!(
                f,
                "demand from BS {} to user {} is {streams}, but that BS does not serve that user",
                bs + 1,
                user + 1
            ),
        }
    }
}

/// Quantities derived from a configuration; all vectors are indexed by cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DerivedQuantities {
    /// `Q_i = (M_i - N_{i-1})^+`.
    pub q: Vec<usize>,
    /// Streams sent by BS `i`.
    pub d_tx: Vec<usize>,
    /// Streams desired at user `j`.
    pub d_rx: Vec<usize>,
    /// Smaller of the two XCI stream counts at user `j`.
    pub k: Vec<usize>,
    /// Larger of the two XCI stream counts at user `j`.
    pub r: Vec<usize>,
    /// `r_j - k_j`: XCI streams that must be nulled rather than aligned.
    pub w: Vec<usize>,
    /// BS whose XCI message at user `j` is the larger one (ties pick `j-1`).
    pub victim_bs: Vec<usize>,
}

/// The two XCI stream counts at user `j`: `(d[j-1][j-1], d[j][j+1])`.
pub fn interferer_streams(demand: &DemandMatrix, user: usize) -> (usize, usize) {
    let cells = demand.rows().len();
    let a = prev(user, cells);
    (demand.get(a, a), demand.get(user, next(user, cells)))
}

impl NetworkConfig {
    /// Three-cell mixed-class example: BS `i` sends `i + 1` streams to its own
    /// user and one stream to the next user; users carry 3, 4 and 5 antennas.
    pub fn three_cell_mixed(m_tx: usize) -> Self {
        NetworkConfig {
            cells: 3,
            overlap: 2,
            users_per_cell: 1,
            m_tx: vec![m_tx; 3],
            n_rx: vec![3, 4, 5],
            demand: DemandMatrix::from_own_cross(&[1, 2, 3], &[1, 1, 1]),
        }
    }

    /// Lists every violated structural invariant.
    pub fn validate(&self) -> Result<(), Vec<ConfigViolation>> {
        let mut v = Vec::new();
        let l = self.cells;
        if !(1 < self.overlap && self.overlap < l) {
            v.push(ConfigViolation::OverlapRange {
                overlap: self.overlap,
                cells: l,
            });
        }
        if self.overlap != 2 {
            v.push(ConfigViolation::UnsupportedOverlap(self.overlap));
        }
        if self.users_per_cell != 1 {
            v.push(ConfigViolation::UsersPerCell(self.users_per_cell));
        }
        for (field, vals) in [("m_tx", &self.m_tx), ("n_rx", &self.n_rx)] {
            if vals.len() != l {
                v.push(ConfigViolation::Length {
                    field,
                    expected: l,
                    got: vals.len(),
                });
            }
            for (index, &a) in vals.iter().enumerate() {
                if a == 0 {
                    v.push(ConfigViolation::ZeroAntennas { field, index });
                }
            }
        }
        let rows = self.demand.rows();
        if rows.len() != l {
            v.push(ConfigViolation::Length {
                field: "demand",
                expected: l,
                got: rows.len(),
            });
        }
        for (bs, row) in rows.iter().enumerate() {
            if row.len() != l {
                v.push(ConfigViolation::Length {
                    field: "demand row",
                    expected: l,
                    got: row.len(),
                });
                continue;
            }
            if l == 0 {
                continue;
            }
            for (user, &streams) in row.iter().enumerate() {
                let served = (0..self.overlap.max(1)).any(|off| wrap(bs, off as i64, l) == user);
                if streams > 0 && !served {
                    v.push(ConfigViolation::OutOfPattern { bs, user, streams });
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// Derived bookkeeping. The configuration must already be valid.
    pub fn derive(&self) -> DerivedQuantities {
        let l = self.cells;
        let q: Vec<usize> = (0..l)
            .map(|i| self.m_tx[i].saturating_sub(self.n_rx[prev(i, l)]))
            .collect();
        let d_tx: Vec<usize> = (0..l).map(|i| (0..l).map(|j| self.demand.get(i, j)).sum()).collect();
        let d_rx: Vec<usize> = (0..l).map(|j| (0..l).map(|i| self.demand.get(i, j)).sum()).collect();
        assert_eq!(d_tx.iter().sum::<usize>(), d_rx.iter().sum::<usize>());
        let mut k = Vec::with_capacity(l);
        let mut r = Vec::with_capacity(l);
        let mut w = Vec::with_capacity(l);
        let mut victim_bs = Vec::with_capacity(l);
        for j in 0..l {
            let (a, b) = interferer_streams(&self.demand, j);
            k.push(a.min(b));
            r.push(a.max(b));
            w.push(a.max(b) - a.min(b));
            victim_bs.push(if a >= b { prev(j, l) } else { j });
        }
        DerivedQuantities {
            q,
            d_tx,
            d_rx,
            k,
            r,
            w,
            victim_bs,
        }
    }

    /// Alignment feasibility of this configuration.
    pub fn check_feasibility(&self) -> FeasibilityReport {
        let dq = self.derive();
        feasibility_checks(&dq.q, &self.n_rx, &self.demand)
    }
}

/// Feasibility conditions for the closed-form alignment scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Condition {
    /// (a) `Q_i >= d_i`.
    TransmitDimensions,
    /// (b) `N_j >= d^[j] + k_j`.
    ReceiveDimensions,
    /// (c) `Q_x - N_j >= w_j` for the BS `x` holding the larger XCI message.
    ResidualNulling,
    /// (d) `Q_{j-1} + Q_j - N_j >= k_j`.
    JointAlignment,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::TransmitDimensions => "a:transmit-dimensions",
            Condition::ReceiveDimensions => "b:receive-dimensions",
            Condition::ResidualNulling => "c:residual-nulling",
            Condition::JointAlignment => "d:joint-alignment",
        }
    }
}

/// One evaluated condition at one BS or user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionCheck {
    pub condition: Condition,
    /// BS index for (a), user index otherwise.
    pub index: usize,
    pub required: usize,
    pub available: usize,
}

impl ConditionCheck {
    pub fn passed(&self) -> bool {
        self.available >= self.required
    }

    pub fn is_tight(&self) -> bool {
        self.available == self.required
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibilityReport {
    pub checks: Vec<ConditionCheck>,
}

impl FeasibilityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(ConditionCheck::passed)
    }

    pub fn condition_passed(&self, c: Condition) -> bool {
        self.checks.iter().filter(|x| x.condition == c).all(ConditionCheck::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let who = match c.condition {
                Condition::TransmitDimensions => "BS",
                _ => "user",
            };
            writeln!(
                f,
                "{} {:<22} {who} {}: required {} available {}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.condition.label(),
                c.index + 1,
                c.required,
                c.available
            )?;
        }
        Ok(())
    }
}

/// Evaluates conditions (a)-(d) for precoder dimensions `q`, receive antenna
/// counts `n_rx` and a demand matrix. Shared by the network check and the
/// DoF enumeration.
pub fn feasibility_checks(q: &[usize], n_rx: &[usize], demand: &DemandMatrix) -> FeasibilityReport {
    let l = q.len();
    let mut checks = Vec::with_capacity(4 * l);
    for (i, &qi) in q.iter().enumerate() {
        let d_i: usize = (0..l).map(|j| demand.get(i, j)).sum();
        checks.push(ConditionCheck {
            condition: Condition::TransmitDimensions,
            index: i,
            required: d_i,
            available: qi,
        });
    }
    for j in 0..l {
        let (a, b) = interferer_streams(demand, j);
        let k = a.min(b);
        let w = a.max(b) - k;
        let d_rx: usize = (0..l).map(|i| demand.get(i, j)).sum();
        checks.push(ConditionCheck {
            condition: Condition::ReceiveDimensions,
            index: j,
            required: d_rx + k,
            available: n_rx[j],
        });
        if w > 0 {
            let x = if a >= b { prev(j, l) } else { j };
            checks.push(ConditionCheck {
                condition: Condition::ResidualNulling,
                index: j,
                required: w,
                available: q[x].saturating_sub(n_rx[j]),
            });
        }
        checks.push(ConditionCheck {
            condition: Condition::JointAlignment,
            index: j,
            required: k,
            available: (q[prev(j, l)] + q[j]).saturating_sub(n_rx[j]),
        });
    }
    FeasibilityReport { checks }
}
