//! Micro-to-macro aggregation: macro variables, transaction fields,
//! impulses, and field velocities from sampled agent-level data.
//!
//! The distribution-function averages of the model are realized as empirical
//! cell sums over sampled particles and transaction events; the law of large
//! numbers supplies the averaging. Grids store field *density* (cell mass
//! divided by cell area) so Monte Carlo reconstructions are directly
//! comparable with the steady-state formulas.
//!
//! Binning rule: a coordinate exactly on an interior cell edge belongs to
//! the higher-index cell, and `x = X` belongs to the last cell.

use crate::output::fmt_f64;
use ndarray::Array2;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("event {index}: point ({x}, {y}) outside domain [0, {x_max}]^2")]
    OutOfDomain {
        index: usize,
        x: f64,
        y: f64,
        x_max: f64,
    },
    #[error("particle {index}: coordinate {x} outside domain [0, {x_max}]")]
    ParticleOutOfDomain { index: usize, x: f64, x_max: f64 },
    #[error("event {index}: amount {amount} is negative")]
    NegativeAmount { index: usize, amount: f64 },
    #[error("cell count must be at least 1")]
    BadCellCount,
    #[error("variable index {index} out of range (particle has {len} variables)")]
    BadVarIndex { index: usize, len: usize },
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An economic agent as a point particle on the one-dimensional risk axis.
#[derive(Debug, Clone, PartialEq)]
pub struct EParticle {
    /// Risk coordinate in `[0, X]`.
    pub x: f64,
    /// Risk-space velocity.
    pub v: f64,
    /// Extensive (additive, currency-like) variable values.
    pub vars: Vec<f64>,
}

/// One pairwise transaction record: a creditor at risk `x` transfers
/// `amount` to a borrower at risk `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransactionEvent {
    pub x: f64,
    pub y: f64,
    pub amount: f64,
    pub v_creditor: f64,
    pub v_borrower: f64,
}

/// Cell index of a coordinate under the higher-index edge rule.
fn bin_index(coord: f64, x_max: f64, n: usize) -> usize {
    let idx = (coord / x_max * n as f64).floor() as isize;
    idx.clamp(0, n as isize - 1) as usize
}

/// Per-cell sums of one extensive variable and its impulse:
/// `U[c] = Σ u_i` and `P[c] = Σ u_i·v_i` over the particles binned to cell
/// `c`. Totals over cells equal totals over particles.
pub fn aggregate_variables(
    particles: &[EParticle],
    var_index: usize,
    n_cells: usize,
    x_max: f64,
) -> Result<(Vec<f64>, Vec<f64>), AggregateError> {
    if n_cells == 0 {
        return Err(AggregateError::BadCellCount);
    }
    let mut density = vec![0.0; n_cells];
    let mut impulse = vec![0.0; n_cells];
    for (index, p) in particles.iter().enumerate() {
        if !(0.0..=x_max).contains(&p.x) {
            return Err(AggregateError::ParticleOutOfDomain {
                index,
                x: p.x,
                x_max,
            });
        }
        let u = *p.vars.get(var_index).ok_or(AggregateError::BadVarIndex {
            index: var_index,
            len: p.vars.len(),
        })?;
        let cell = bin_index(p.x, x_max, n_cells);
        density[cell] += u;
        impulse[cell] += u * p.v;
    }
    Ok((density, impulse))
}

/// Velocity of an aggregate: `P/U` where `|U|` clears the denominator guard,
/// `None` otherwise. The undefined marker is a value, not an error.
pub fn field_velocity(density: f64, impulse: f64, eps_den: f64) -> Option<f64> {
    if density.abs() > eps_den {
        Some(impulse / density)
    } else {
        None
    }
}

/// Discretized transaction field on the risk square: per-cell density plus
/// per-axis velocity components. Velocities are defined only where the cell
/// carries mass; undefined entries are NaN in the raw arrays and `None`
/// through the accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    n_x: usize,
    n_y: usize,
    x_max: f64,
    cell_x: f64,
    cell_y: f64,
    /// Exact per-cell amount sums; `values` is this divided by cell area.
    mass: Array2<f64>,
    values: Array2<f64>,
    vel_x: Array2<f64>,
    vel_y: Array2<f64>,
}

/// Neumaier compensated summation.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

impl FieldGrid {
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_x * self.cell_y
    }

    /// Center coordinates of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5) * self.cell_x,
            (j as f64 + 0.5) * self.cell_y,
        )
    }

    /// Field density of cell `(i, j)`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Transaction mass of cell `(i, j)`: the exact per-cell amount sum.
    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.mass[(i, j)]
    }

    pub fn vel_x(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.vel_x[(i, j)];
        (!v.is_nan()).then_some(v)
    }

    pub fn vel_y(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.vel_y[(i, j)];
        (!v.is_nan()).then_some(v)
    }

    /// Total transaction mass (`Σ value·cell_area` up to rounding), summed
    /// with compensation so it matches the event total to 1e-12 relative.
    pub fn grand_total(&self) -> f64 {
        compensated_sum(self.mass.iter().copied())
    }

    /// Outflow marginal over x-cells: `Σ_j value(i, j)·cell_area`, the mass
    /// column at `i` (the y-integral of the density over the strip).
    pub fn marginal_out(&self) -> Vec<f64> {
        (0..self.n_x)
            .map(|i| compensated_sum((0..self.n_y).map(|j| self.mass[(i, j)])))
            .collect()
    }

    /// Inflow marginal over y-cells: `Σ_i value(i, j)·cell_area`.
    pub fn marginal_in(&self) -> Vec<f64> {
        (0..self.n_y)
            .map(|j| compensated_sum((0..self.n_x).map(|i| self.mass[(i, j)])))
            .collect()
    }

    /// Writes the grid as CSV with header `xi,yi,value,vel_x,vel_y`.
    /// Undefined velocities print as `nan`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "xi,yi,value,vel_x,vel_y")?;
        for i in 0..self.n_x {
            for j in 0..self.n_y {
                writeln!(
                    w,
                    "{i},{j},{},{},{}",
                    fmt_f64(self.values[(i, j)]),
                    fmt_f64(self.vel_x[(i, j)]),
                    fmt_f64(self.vel_y[(i, j)])
                )?;
            }
        }
        Ok(())
    }
}

/// Partial per-cell sums, mergeable across workers by addition.
#[derive(Debug, Clone)]
struct GridAccumulator {
    mass: Array2<f64>,
    imp_x: Array2<f64>,
    imp_y: Array2<f64>,
}

impl GridAccumulator {
    fn new(n: usize) -> Self {
        GridAccumulator {
            mass: Array2::zeros((n, n)),
            imp_x: Array2::zeros((n, n)),
            imp_y: Array2::zeros((n, n)),
        }
    }

    fn add(&mut self, event: &TransactionEvent, x_max: f64, n: usize) {
        let i = bin_index(event.x, x_max, n);
        let j = bin_index(event.y, x_max, n);
        self.mass[(i, j)] += event.amount;
        self.imp_x[(i, j)] += event.amount * event.v_creditor;
        self.imp_y[(i, j)] += event.amount * event.v_borrower;
    }

    fn merge(&mut self, other: &GridAccumulator) {
        self.mass += &other.mass;
        self.imp_x += &other.imp_x;
        self.imp_y += &other.imp_y;
    }

    fn finalize(self, n: usize, x_max: f64) -> FieldGrid {
        let cell = x_max / n as f64;
        let area = cell * cell;
        let total_mass = self.mass.sum();
        // Scale-aware zero guard for the velocity division.
        let eps_den = 1e-12 * total_mass / (n * n) as f64;
        let mut vel_x = Array2::from_elem((n, n), f64::NAN);
        let mut vel_y = Array2::from_elem((n, n), f64::NAN);
        for i in 0..n {
            for j in 0..n {
                let m = self.mass[(i, j)];
                if let Some(v) = field_velocity(m, self.imp_x[(i, j)], eps_den) {
                    vel_x[(i, j)] = v;
                }
                if let Some(v) = field_velocity(m, self.imp_y[(i, j)], eps_den) {
                    vel_y[(i, j)] = v;
                }
            }
        }
        FieldGrid {
            n_x: n,
            n_y: n,
            x_max,
            cell_x: cell,
            cell_y: cell,
            values: &self.mass / area,
            mass: self.mass,
            vel_x,
            vel_y,
        }
    }
}

fn validate_events(events: &[TransactionEvent], x_max: f64) -> Result<(), AggregateError> {
    for (index, e) in events.iter().enumerate() {
        if !(0.0..=x_max).contains(&e.x) || !(0.0..=x_max).contains(&e.y) {
            return Err(AggregateError::OutOfDomain {
                index,
                x: e.x,
                y: e.y,
                x_max,
            });
        }
        if e.amount < 0.0 || !e.amount.is_finite() {
            return Err(AggregateError::NegativeAmount {
                index,
                amount: e.amount,
            });
        }
    }
    Ok(())
}

/// Aggregates transaction events into an `n_cells × n_cells` field grid:
/// per cell pair, density `Σ amount / area` and velocities
/// `Σ amount·v / Σ amount` per axis.
pub fn aggregate_transactions(
    events: &[TransactionEvent],
    n_cells: usize,
    x_max: f64,
) -> Result<FieldGrid, AggregateError> {
    aggregate_transactions_partitioned(events, n_cells, x_max, 1)
}

/// Number of fixed partitions used by the parallel aggregation path. The
/// partitioning (and therefore the merge order and the output bytes) does
/// not depend on the worker count.
const PARTITIONS: usize = 16;

/// [`aggregate_transactions`] with events partitioned into fixed chunks and
/// the partial grids merged by addition in chunk order. `workers` caps the
/// threads actually used; the result is byte-identical for any cap.
pub fn aggregate_transactions_partitioned(
    events: &[TransactionEvent],
    n_cells: usize,
    x_max: f64,
    workers: usize,
) -> Result<FieldGrid, AggregateError> {
    if n_cells == 0 {
        return Err(AggregateError::BadCellCount);
    }
    validate_events(events, x_max)?;

    let chunk_len = events.len().div_ceil(PARTITIONS).max(1);
    let chunks: Vec<&[TransactionEvent]> = events.chunks(chunk_len).collect();
    let workers = workers.clamp(1, chunks.len().max(1));

    let partials: Vec<GridAccumulator> = if workers <= 1 || chunks.len() <= 1 {
        chunks
            .iter()
            .map(|chunk| {
                let mut acc = GridAccumulator::new(n_cells);
                for e in *chunk {
                    acc.add(e, x_max, n_cells);
                }
                acc
            })
            .collect()
    } else {
        let mut partials: Vec<Option<GridAccumulator>> = (0..chunks.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            for (slot_group, chunk_group) in partials
                .chunks_mut(chunks.len().div_ceil(workers))
                .zip(chunks.chunks(chunks.len().div_ceil(workers)))
            {
                scope.spawn(move || {
                    for (slot, chunk) in slot_group.iter_mut().zip(chunk_group) {
                        let mut acc = GridAccumulator::new(n_cells);
                        for e in *chunk {
                            acc.add(e, x_max, n_cells);
                        }
                        *slot = Some(acc);
                    }
                });
            }
        });
        partials.into_iter().map(|p| p.unwrap()).collect()
    };

    let mut total = GridAccumulator::new(n_cells);
    for p in &partials {
        total.merge(p);
    }
    Ok(total.finalize(n_cells, x_max))
}

/// Expected CSV header for event files.
pub const EVENTS_CSV_HEADER: &str = "x,y,amount,v_creditor,v_borrower";

/// Reads transaction events from CSV with header
/// `x,y,amount,v_creditor,v_borrower`.
pub fn read_events_csv<R: BufRead>(reader: R) -> Result<Vec<TransactionEvent>, AggregateError> {
    let mut events = Vec::new();
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(header))) if header.trim() == EVENTS_CSV_HEADER => {}
        Some((_, Ok(header))) => {
            return Err(AggregateError::Csv {
                line: 1,
                message: format!("expected header `{EVENTS_CSV_HEADER}`, got `{header}`"),
            })
        }
        Some((_, Err(e))) => return Err(e.into()),
        None => {
            return Err(AggregateError::Csv {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(AggregateError::Csv {
                line: idx + 1,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let mut vals = [0.0f64; 5];
        for (slot, field) in vals.iter_mut().zip(&fields) {
            *slot = field.trim().parse().map_err(|e| AggregateError::Csv {
                line: idx + 1,
                message: format!("bad number `{field}`: {e}"),
            })?;
        }
        events.push(TransactionEvent {
            x: vals[0],
            y: vals[1],
            amount: vals[2],
            v_creditor: vals[3],
            v_borrower: vals[4],
        });
    }
    Ok(events)
}

/// Writes events as CSV with the standard header.
pub fn write_events_csv<W: Write>(events: &[TransactionEvent], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{EVENTS_CSV_HEADER}")?;
    for e in events {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(e.x),
            fmt_f64(e.y),
            fmt_f64(e.amount),
            fmt_f64(e.v_creditor),
            fmt_f64(e.v_borrower)
        )?;
    }
    Ok(())
}
