//! Price ingestion, return computation, moment estimation, train/test
//! splitting, and universe reduction by inclusion mask.
//!
//! Prices come from a CSV file (`date,TICKER,...` header) or from the
//! synthetic geometric-random-walk generator. Dates are opaque ordered
//! labels; no calendar arithmetic happens anywhere.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{cholesky_lower, Matrix};

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("missing cell at row {row}, column {col}")]
    MissingData { row: usize, col: usize },
    #[error("non-positive or unparsable price at row {row}, column {col}: {value:?}")]
    InvalidPrice { row: usize, col: usize, value: String },
    #[error("duplicate date {date:?}")]
    DuplicateDate { date: String },
    #[error("asset {ticker:?} has zero return variance")]
    DegenerateAsset { ticker: String },
    #[error("split leaves too few rows (train {train}, test {test}; both need >= 2)")]
    SplitTooSmall { train: usize, test: usize },
    #[error("mask selects no assets")]
    EmptyMask,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {need} price rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("split ratio {0} outside (0, 1)")]
    BadRatio(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// T x N closing prices with date labels and tickers.
#[derive(Clone, Debug)]
pub struct PriceMatrix {
    pub dates: Vec<String>,
    pub tickers: Vec<String>,
    prices: Matrix,
}

impl PriceMatrix {
    pub fn new(dates: Vec<String>, tickers: Vec<String>, prices: Matrix) -> Result<Self, MarketError> {
        if prices.rows() < 2 {
            return Err(MarketError::TooFewRows { need: 2, got: prices.rows() });
        }
        if dates.len() != prices.rows() {
            return Err(MarketError::DimensionMismatch { expected: prices.rows(), got: dates.len() });
        }
        if tickers.len() != prices.cols() {
            return Err(MarketError::DimensionMismatch { expected: prices.cols(), got: tickers.len() });
        }
        for i in 0..prices.rows() {
            for j in 0..prices.cols() {
                if !(prices[(i, j)] > 0.0) || !prices[(i, j)].is_finite() {
                    return Err(MarketError::InvalidPrice {
                        row: i,
                        col: j,
                        value: prices[(i, j)].to_string(),
                    });
                }
            }
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(MarketError::DuplicateDate { date: w[1].clone() });
            }
        }
        Ok(Self { dates, tickers, prices })
    }

    pub fn n_days(&self) -> usize {
        self.prices.rows()
    }

    pub fn n_assets(&self) -> usize {
        self.prices.cols()
    }

    pub fn prices(&self) -> &Matrix {
        &self.prices
    }
}

/// M x N fractional returns, M = price rows - 1.
#[derive(Clone, Debug)]
pub struct ReturnMatrix {
    pub tickers: Vec<String>,
    returns: Matrix,
}

impl ReturnMatrix {
    pub fn new(tickers: Vec<String>, returns: Matrix) -> Result<Self, MarketError> {
        if tickers.len() != returns.cols() {
            return Err(MarketError::DimensionMismatch { expected: returns.cols(), got: tickers.len() });
        }
        Ok(Self { tickers, returns })
    }

    pub fn n_periods(&self) -> usize {
        self.returns.rows()
    }

    pub fn n_assets(&self) -> usize {
        self.returns.cols()
    }

    pub fn returns(&self) -> &Matrix {
        &self.returns
    }

    /// Column j as a contiguous sequence (used by the classifier).
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.returns.rows()).map(|t| self.returns[(t, j)]).collect()
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<f64> {
        let m = self.returns.rows() as f64;
        (0..self.returns.cols())
            .map(|j| (0..self.returns.rows()).map(|t| self.returns[(t, j)]).sum::<f64>() / m)
            .collect()
    }
}

/// Mean vector, covariance, and correlation for a return window.
#[derive(Clone, Debug)]
pub struct MomentSet {
    pub tickers: Vec<String>,
    pub mu: Vec<f64>,
    pub sigma: Matrix,
    pub theta: Matrix,
}

impl MomentSet {
    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }
}

/// Per-asset inclusion bits aligned with a ticker list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssetMask {
    pub bits: Vec<bool>,
    pub tickers: Vec<String>,
}

impl AssetMask {
    pub fn new(bits: Vec<bool>, tickers: Vec<String>) -> Result<Self, MarketError> {
        if bits.len() != tickers.len() {
            return Err(MarketError::DimensionMismatch { expected: tickers.len(), got: bits.len() });
        }
        Ok(Self { bits, tickers })
    }

    pub fn all_ones(tickers: Vec<String>) -> Self {
        Self { bits: vec![true; tickers.len()], tickers }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| if b { Some(i) } else { None })
            .collect()
    }
}

/// Parse a price CSV: header `date,<ticker>,...`, one row per day.
/// Rows are sorted by date label before validation.
pub fn load_prices(path: &Path) -> Result<PriceMatrix, MarketError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(MarketError::DimensionMismatch { expected: 2, got: headers.len() });
    }
    let tickers: Vec<String> = headers.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let n = tickers.len();

    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != n + 1 {
            // a short row means at least one trailing cell is absent
            return Err(MarketError::MissingData { row: r, col: record.len().saturating_sub(1) });
        }
        let date = record.get(0).unwrap().trim().to_string();
        let mut vals = Vec::with_capacity(n);
        for j in 0..n {
            let cell = record.get(j + 1).unwrap().trim();
            if cell.is_empty() {
                return Err(MarketError::MissingData { row: r, col: j });
            }
            let v: f64 = cell.parse().map_err(|_| MarketError::InvalidPrice {
                row: r,
                col: j,
                value: cell.to_string(),
            })?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(MarketError::InvalidPrice { row: r, col: j, value: cell.to_string() });
            }
            vals.push(v);
        }
        rows.push((date, vals));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(MarketError::DuplicateDate { date: w[1].0.clone() });
        }
    }
    let dates: Vec<String> = rows.iter().map(|(d, _)| d.clone()).collect();
    let mut prices = Matrix::zeros(rows.len(), n);
    for (i, (_, vals)) in rows.iter().enumerate() {
        prices.row_mut(i).copy_from_slice(vals);
    }
    PriceMatrix::new(dates, tickers, prices)
}

/// Fractional returns: r[t][j] = (p[t+1][j] - p[t][j]) / p[t][j].
pub fn compute_returns(p: &PriceMatrix) -> ReturnMatrix {
    let t = p.n_days();
    let n = p.n_assets();
    let mut r = Matrix::zeros(t - 1, n);
    for i in 0..t - 1 {
        for j in 0..n {
            let p0 = p.prices()[(i, j)];
            let p1 = p.prices()[(i + 1, j)];
            r[(i, j)] = (p1 - p0) / p0;
        }
    }
    ReturnMatrix { tickers: p.tickers.clone(), returns: r }
}

/// Sample moments: column means, covariance with denominator M-1, and the
/// correlation matrix with its diagonal pinned to exactly 1.
pub fn moments(x: &ReturnMatrix) -> Result<MomentSet, MarketError> {
    let m = x.n_periods();
    let n = x.n_assets();
    if m < 2 {
        return Err(MarketError::TooFewRows { need: 2, got: m });
    }
    let mu = x.column_means();
    // column-demeaned deviation matrix
    let mut dev = Matrix::zeros(m, n);
    for t in 0..m {
        for j in 0..n {
            dev[(t, j)] = x.returns()[(t, j)] - mu[j];
        }
    }
    let denom = (m - 1) as f64;
    let mut sigma = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for t in 0..m {
                s += dev[(t, i)] * dev[(t, j)];
            }
            let v = s / denom;
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    for j in 0..n {
        let var = sigma[(j, j)];
        let scale = mu[j] * mu[j];
        if var <= f64::EPSILON * f64::EPSILON * scale.max(1.0) {
            return Err(MarketError::DegenerateAsset { ticker: x.tickers[j].clone() });
        }
    }
    let theta = correlation_from(&sigma);
    Ok(MomentSet { tickers: x.tickers.clone(), mu, sigma, theta })
}

fn correlation_from(sigma: &Matrix) -> Matrix {
    let n = sigma.rows();
    let mut theta = Matrix::zeros(n, n);
    for i in 0..n {
        theta[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let v = sigma[(i, j)] / (sigma[(i, i)] * sigma[(j, j)]).sqrt();
            theta[(i, j)] = v;
            theta[(j, i)] = v;
        }
    }
    theta
}

/// First floor(ratio * M) rows for training, remainder for testing.
pub fn split(x: &ReturnMatrix, ratio: f64) -> Result<(ReturnMatrix, ReturnMatrix), MarketError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(MarketError::BadRatio(ratio));
    }
    let m = x.n_periods();
    let train_rows = ((ratio * m as f64).floor() as usize).min(m);
    let test_rows = m - train_rows;
    if train_rows < 2 || test_rows < 2 {
        return Err(MarketError::SplitTooSmall { train: train_rows, test: test_rows });
    }
    let n = x.n_assets();
    let mut train = Matrix::zeros(train_rows, n);
    let mut test = Matrix::zeros(test_rows, n);
    for t in 0..train_rows {
        train.row_mut(t).copy_from_slice(x.returns().row(t));
    }
    for t in 0..test_rows {
        test.row_mut(t).copy_from_slice(x.returns().row(train_rows + t));
    }
    Ok((
        ReturnMatrix { tickers: x.tickers.clone(), returns: train },
        ReturnMatrix { tickers: x.tickers.clone(), returns: test },
    ))
}

/// Drop zero-bit assets from mu and sigma; the correlation matrix is
/// recomputed from the reduced covariance with the same formula used by
/// [`moments`], so reducing with an all-ones mask is an exact identity.
pub fn reduce_universe(m: &MomentSet, mask: &AssetMask) -> Result<MomentSet, MarketError> {
    if mask.len() != m.n_assets() {
        return Err(MarketError::DimensionMismatch { expected: m.n_assets(), got: mask.len() });
    }
    let keep = mask.selected_indices();
    if keep.is_empty() {
        return Err(MarketError::EmptyMask);
    }
    let mu: Vec<f64> = keep.iter().map(|&i| m.mu[i]).collect();
    let tickers: Vec<String> = keep.iter().map(|&i| m.tickers[i].clone()).collect();
    let sigma = m.sigma.principal_submatrix(&keep);
    let theta = correlation_from(&sigma);
    Ok(MomentSet { tickers, mu, sigma, theta })
}

/// Correlation structure for the synthetic generator.
#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub n_assets: usize,
    pub n_days: usize,
    pub seed: u64,
    /// Baseline pairwise correlation of the driving noise.
    pub base_correlation: f64,
    /// Pairs forced to a specific correlation (overrides the baseline).
    pub correlation_overrides: Vec<(usize, usize, f64)>,
}

impl SynthConfig {
    pub fn new(n_assets: usize, n_days: usize, seed: u64) -> Self {
        Self {
            n_assets,
            n_days,
            seed,
            base_correlation: 0.3,
            correlation_overrides: Vec::new(),
        }
    }
}

/// Geometric-random-walk prices with a configurable cross-correlation
/// structure. Deterministic for a fixed seed.
pub fn synth_prices(n_assets: usize, n_days: usize, seed: u64) -> PriceMatrix {
    synth_prices_with(&SynthConfig::new(n_assets, n_days, seed))
}

pub fn synth_prices_with(cfg: &SynthConfig) -> PriceMatrix {
    assert!(cfg.n_assets >= 1, "need at least one asset");
    assert!(cfg.n_days >= 3, "need at least three days");
    let n = cfg.n_assets;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // target correlation of the driving noise
    let mut corr = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { cfg.base_correlation });
    for &(i, j, rho) in &cfg.correlation_overrides {
        assert!(i < n && j < n && i != j, "bad correlation override");
        corr[(i, j)] = rho;
        corr[(j, i)] = rho;
    }
    // blend toward the identity until the matrix factors
    let chol = {
        let mut ridge = 0.0f64;
        loop {
            let blended = Matrix::from_fn(n, n, |i, j| {
                if i == j {
                    1.0
                } else {
                    corr[(i, j)] / (1.0 + ridge)
                }
            });
            match cholesky_lower(&blended) {
                Ok(l) => break l,
                Err(_) => ridge = if ridge == 0.0 { 1e-6 } else { ridge * 4.0 },
            }
        }
    };

    let drifts: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0001..0.001)).collect();
    let vols: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.03)).collect();
    let mut prices = Matrix::zeros(cfg.n_days, n);
    for j in 0..n {
        prices[(0, j)] = rng.gen_range(20.0..200.0);
    }
    let mut g = vec![0.0; n];
    for t in 1..cfg.n_days {
        for gj in g.iter_mut() {
            *gj = standard_normal(&mut rng);
        }
        for j in 0..n {
            // correlated shock: row j of the Cholesky factor times g
            let shock = crate::linalg::dot(&chol.row(j)[..=j], &g[..=j]);
            let r = (drifts[j] + vols[j] * shock).max(-0.9);
            prices[(t, j)] = prices[(t - 1, j)] * (1.0 + r);
        }
    }
    let dates: Vec<String> = (0..cfg.n_days).map(|t| format!("day-{t:06}")).collect();
    let tickers: Vec<String> = (0..n).map(|j| format!("SYN{j:04}")).collect();
    PriceMatrix::new(dates, tickers, prices).expect("synthetic prices are valid by construction")
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one value per call keeps the stream layout simple
    loop {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        if z.is_finite() {
            return z;
        }
    }
}
