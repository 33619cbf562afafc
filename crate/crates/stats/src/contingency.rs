use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::factorial::ln_factorial;

use crate::{Method, StatsError, TestResult};

pub const DEFAULT_MC_SEED: u64 = 20_240_601;
pub const DEFAULT_MC_REPLICATES: u64 = 100_000;

/// Tables whose probability is within this relative tolerance of the
/// observed one count as "at least as extreme".
const REL_TOL: f64 = 1e-7;
const ENUMERATION_LIMIT: u64 = 5_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    cells: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(cells: Vec<Vec<u64>>) -> Result<Self, StatsError> {
        let c = cells.first().map_or(0, Vec::len);
        if cells.is_empty() || c == 0 {
            return Err(StatsError::Invalid("table needs at least one row and column".into()));
        }
        if let Some(r) = cells.iter().find(|r| r.len() != c) {
            return Err(StatsError::LengthMismatch(r.len(), c));
        }
        let t = ContingencyTable { cells };
        if t.total() == 0 {
            return Err(StatsError::EmptyTable);
        }
        Ok(t)
    }

    pub fn cells(&self) -> &[Vec<u64>] {
        &self.cells
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.cells.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.cells[0].len()).map(|j| self.cells.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    /// Log-probability of the table under independence given its margins.
    pub fn ln_probability(&self) -> f64 {
        margin_constant(&self.row_sums(), &self.col_sums()) - self.cells.iter().flatten().map(|&x| ln_factorial(x)).sum::<f64>()
    }
}

fn margin_constant(rows: &[u64], cols: &[u64]) -> f64 {
    let n: u64 = rows.iter().sum();
    rows.iter().chain(cols).map(|&x| ln_factorial(x)).sum::<f64>() - ln_factorial(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum ContingencyMethod {
    /// Pearson statistic without continuity correction.
    ChiSquare,
    /// Exact conditional test by enumerating every table with the observed
    /// margins; hypergeometric for 2x2.
    FisherExact,
    /// Fisher statistic with tables sampled under fixed margins.
    MonteCarlo { replicates: u64, seed: u64 },
    /// Exact when enumeration is feasible, otherwise Monte Carlo.
    Auto { replicates: u64, seed: u64 },
}

impl Default for ContingencyMethod {
    fn default() -> Self {
        ContingencyMethod::Auto {
            replicates: DEFAULT_MC_REPLICATES,
            seed: DEFAULT_MC_SEED,
        }
    }
}

pub fn contingency_test(table: &ContingencyTable, method: ContingencyMethod) -> Result<TestResult, StatsError> {
    match method {
        ContingencyMethod::ChiSquare => chi_square(table),
        ContingencyMethod::FisherExact => fisher_exact(table),
        ContingencyMethod::MonteCarlo { replicates, seed } => monte_carlo(table, replicates, seed),
        ContingencyMethod::Auto { replicates, seed } => match fisher_exact(table) {
            Err(StatsError::TooLarge(_)) => monte_carlo(table, replicates, seed),
            other => other,
        },
    }
}

/// Rows and columns with zero margins are dropped before testing.
fn chi_square(table: &ContingencyTable) -> Result<TestResult, StatsError> {
    let rows = table.row_sums();
    let cols = table.col_sums();
    let keep_r: Vec<usize> = (0..rows.len()).filter(|&i| rows[i] > 0).collect();
    let keep_c: Vec<usize> = (0..cols.len()).filter(|&j| cols[j] > 0).collect();
    if keep_r.len() < 2 || keep_c.len() < 2 {
        return Err(StatsError::Invalid("chi-square needs two nonempty rows and columns".into()));
    }
    let n = table.total() as f64;
    let mut stat = 0.0;
    for &i in &keep_r {
        for &j in &keep_c {
            let e = rows[i] as f64 * cols[j] as f64 / n;
            stat += (table.cells[i][j] as f64 - e).powi(2) / e;
        }
    }
    let df = ((keep_r.len() - 1) * (keep_c.len() - 1)) as f64;
    let p = ChiSquared::new(df).map_err(|e| StatsError::Invalid(e.to_string()))?.sf(stat);
    Ok(TestResult::new(stat, p, Method::Asymptotic, table.total() as usize))
}

/// Calls `visit` with the interior cell counts of every table matching the
/// margins, in row-major order. Fails once more than `limit` tables are seen.
fn enumerate_tables(rows: &[u64], cols: &[u64], limit: u64, visit: &mut dyn FnMut(&[u64])) -> Result<u64, StatsError> {
    struct State<'a> {
        rows: &'a [u64],
        c: usize,
        col_left: Vec<u64>,
        cells: Vec<u64>,
        seen: u64,
        limit: u64,
    }
    fn fill(s: &mut State, i: usize, j: usize, row_left: u64, visit: &mut dyn FnMut(&[u64])) -> Result<(), StatsError> {
        let r = s.rows.len();
        if i == r - 1 {
            // Last row is forced by the column remainders.
            for jj in 0..s.c {
                s.cells[i * s.c + jj] = s.col_left[jj];
            }
            s.seen += 1;
            if s.seen > s.limit {
                return Err(StatsError::TooLarge(s.limit));
            }
            visit(&s.cells);
            return Ok(());
        }
        if j == s.c - 1 {
            if row_left > s.col_left[j] {
                return Ok(());
            }
            s.cells[i * s.c + j] = row_left;
            s.col_left[j] -= row_left;
            let next_row = if i + 1 < r { s.rows[i + 1] } else { 0 };
            let out = fill(s, i + 1, 0, next_row, visit);
            s.col_left[j] += row_left;
            return out;
        }
        let later_cap: u64 = s.col_left[j + 1..].iter().sum();
        let lo = row_left.saturating_sub(later_cap);
        let hi = row_left.min(s.col_left[j]);
        for x in lo..=hi {
            s.cells[i * s.c + j] = x;
            s.col_left[j] -= x;
            let out = fill(s, i, j + 1, row_left - x, visit);
            s.col_left[j] += x;
            out?;
        }
        Ok(())
    }
    let mut s = State {
        rows,
        c: cols.len(),
        col_left: cols.to_vec(),
        cells: vec![0; rows.len() * cols.len()],
        seen: 0,
        limit,
    };
    fill(&mut s, 0, 0, rows[0], visit)?;
    Ok(s.seen)
}

fn fisher_exact(table: &ContingencyTable) -> Result<TestResult, StatsError> {
    let rows = table.row_sums();
    let cols = table.col_sums();
    let k = margin_constant(&rows, &cols);
    let ln_obs = table.ln_probability();
    let threshold = ln_obs + REL_TOL.ln_1p();
    let mut p = 0.0;
    enumerate_tables(&rows, &cols, ENUMERATION_LIMIT, &mut |cells| {
        let lp = k - cells.iter().map(|&x| ln_factorial(x)).sum::<f64>();
        if lp <= threshold {
            p += lp.exp();
        }
    })?;
    Ok(TestResult::new(ln_obs.exp(), p, Method::Exact, table.total() as usize))
}

fn monte_carlo(table: &ContingencyTable, replicates: u64, seed: u64) -> Result<TestResult, StatsError> {
    if replicates == 0 {
        return Err(StatsError::Invalid("Monte Carlo needs at least one replicate".into()));
    }
    let rows = table.row_sums();
    let cols = table.col_sums();
    let n = table.total() as usize;
    let lnf: Vec<f64> = (0..=n as u64).map(ln_factorial).collect();
    let k = margin_constant(&rows, &cols);
    let ln_obs = table.ln_probability();
    let threshold = ln_obs + REL_TOL.ln_1p();

    let mut labels: Vec<usize> = cols.iter().enumerate().flat_map(|(j, &c)| std::iter::repeat_n(j, c as usize)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; cols.len()];
    let mut extreme = 0u64;
    for _ in 0..replicates {
        labels.shuffle(&mut rng);
        let mut lp = k;
        let mut start = 0;
        for &r in &rows {
            counts.iter_mut().for_each(|c| *c = 0);
            for &l in &labels[start..start + r as usize] {
                counts[l] += 1;
            }
            lp -= counts.iter().map(|&c| lnf[c]).sum::<f64>();
            start += r as usize;
        }
        if lp <= threshold {
            extreme += 1;
        }
    }
    let p = (1 + extreme) as f64 / (1 + replicates) as f64;
    let mut out = TestResult::new(ln_obs.exp(), p, Method::MonteCarlo, n);
    out.seed = Some(seed);
    out.replicates = Some(replicates);
    Ok(out)
}
