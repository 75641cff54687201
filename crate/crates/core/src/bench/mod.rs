//! Experiment runner: configuration, structured records and CSV export.

mod config;

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{exact_log4, ExperimentConfig, Mode, XSpec};

use crate::analysis::{
    beta_ratio, empirical_gram_error, error_stats, gram_error_expectation, nearly_optimal_gram_bound,
    optimal_probabilities, ErrorStats, MonteCarloMean, SeparatedPairGeometry,
};
use crate::compress::{apply_compressed, compress_block, sample_columns, sample_rows, BlockView, SampleBudget};
use crate::geometry::{Point2D, PointSet, QuadTree, Square};
use crate::hmatrix::{
    block_census, direct_summation, hmatrix_product_with_stats, plan, CensusTable, ExecStats, Interaction,
    TraversalConfig,
};
use crate::kernels::{Kernel, KernelVisitor};
use crate::linalg::{svd_small, SMALL_MATRIX_CAP};
use crate::rng::{derive_seed, derive_stream, BlockId};
use crate::{Error, Result, Scalar};

const GEOMETRY_LABEL: u64 = 0x6765_6f6d;
const X_LABEL: u64 = 0x7876_6563;
const REALIZATION_BASE: u64 = 0x7265_616c_0000;

/// Leading singular values of a pair block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaDecay {
    /// Exact values from a dense SVD.
    pub exact: Vec<f64>,
    /// Values of one sampled `k x k` core.
    pub sampled: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub c: usize,
    /// Optimal probabilities on a random dense matrix.
    pub optimal_empirical: MonteCarloMean,
    pub optimal_expectation: f64,
    /// Uniform probabilities on a well-separated kernel block.
    pub uniform_empirical: MonteCarloMean,
    pub uniform_bound: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub t_hrcm: f64,
    pub t_direct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    /// Least-squares slope of `ln t` against `ln N`.
    pub hrcm_slope: Option<f64>,
    pub direct_slope: Option<f64>,
}

/// Everything one run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<ErrorStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_direct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_hrcm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec: Option<ExecStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub census: Option<CensusTable>,
    /// Census observed by planning a traversal over an actual tree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traversal_census: Option<CensusTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<SigmaDecay>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gram: Option<GramReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingReport>,
}

impl RunRecord {
    fn new(config: ExperimentConfig) -> Self {
        Self {
            config,
            stats: None,
            t_direct: None,
            t_hrcm: None,
            exec: None,
            census: None,
            traversal_census: None,
            sigma: None,
            gram: None,
            timing: None,
        }
    }

    /// Copy with all wall-clock fields cleared.
    pub fn without_wall_clock(&self) -> Self {
        let mut r = self.clone();
        r.t_direct = None;
        r.t_hrcm = None;
        if let Some(t) = r.timing.as_mut() {
            for row in &mut t.rows {
                row.t_hrcm = 0.0;
                row.t_direct = None;
            }
            t.hrcm_slope = None;
            t.direct_slope = None;
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Rows `(N, K, mean, variance, t_direct, t_hrcm)`.
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        if let Some(t) = &self.timing {
            return t
                .rows
                .iter()
                .map(|r| CsvRow {
                    n: r.n,
                    k: self.config.k,
                    mean: None,
                    variance: None,
                    t_direct: r.t_direct,
                    t_hrcm: Some(r.t_hrcm),
                })
                .collect();
        }
        vec![CsvRow {
            n: self.config.n,
            k: self.config.k,
            mean: self.stats.as_ref().map(|s| s.mean),
            variance: self.stats.as_ref().map(|s| s.variance),
            t_direct: self.t_direct,
            t_hrcm: self.t_hrcm,
        }]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
        for row in self.csv_rows() {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub t_direct: Option<f64>,
    pub t_hrcm: Option<f64>,
}

/// Run one experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Census => run_census(cfg),
        _ => cfg.kernel.visit(Runner { cfg }),
    }
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
}

impl KernelVisitor for Runner<'_> {
    type Output = Result<RunRecord>;
    fn visit<K: Kernel + Clone + 'static>(self, kernel: K) -> Result<RunRecord> {
        match self.cfg.mode {
            Mode::Pair => run_pair(self.cfg, &kernel),
            Mode::Single => run_single(self.cfg, &kernel),
            Mode::SvdDecay => run_svd_decay(self.cfg, &kernel),
            Mode::GramCheck => run_gram_check(self.cfg, &kernel),
            Mode::Timing => run_timing(self.cfg, &kernel),
            Mode::Census => unreachable!("census needs no kernel"),
        }
    }
}

fn geometry_rng(cfg: &ExperimentConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, GEOMETRY_LABEL))
}

/// Seed of realization `r`.
pub fn realization_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, REALIZATION_BASE + r as u64)
}

fn target_box(cfg: &ExperimentConfig) -> Square {
    Square::new(Point2D::new(0.0, 0.0), cfg.domain_size)
}

fn source_box(cfg: &ExperimentConfig) -> Square {
    Square::new(Point2D::new(cfg.pair_separation, 0.0), cfg.domain_size)
}

/// Targets and sources uniform in two boxes whose centers are
/// `pair_separation` apart along x; source densities uniform in `[0, 1)`.
pub fn pair_point_sets(cfg: &ExperimentConfig) -> Result<(PointSet, PointSet)> {
    let mut rng = geometry_rng(cfg);
    let targets = PointSet::uniform(cfg.n, target_box(cfg), &mut rng)?;
    let sources = PointSet::uniform(cfg.n, source_box(cfg), &mut rng)?.with_random_densities(&mut rng);
    Ok((targets, sources))
}

/// Jittered grid of `n = 4^p` points in `[0, L]^2` with densities uniform in `[0, 1)`.
pub fn single_point_set(cfg: &ExperimentConfig, n: usize) -> Result<PointSet> {
    let p = exact_log4(n).ok_or_else(|| Error::Config(format!("need n = 4^p, got {n}")))?;
    let mut rng = geometry_rng(cfg);
    Ok(PointSet::jittered_grid(p, target_box(cfg), &mut rng)?.with_random_densities(&mut rng))
}

/// The multiplied vector, length `n`.
pub fn make_x(cfg: &ExperimentConfig, n: usize) -> Result<Vec<f64>> {
    match &cfg.x {
        XSpec::Ones => Ok(vec![1.0; n]),
        XSpec::RandomUniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, X_LABEL));
            Ok((0..n).map(|_| rng.random::<f64>()).collect())
        }
        XSpec::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let x = text
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Config(format!("bad x entry `{t}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if x.len() != n {
                return Err(Error::Config(format!("x file has {} entries, need {n}", x.len())));
            }
            Ok(x)
        }
    }
}

fn lift<S: Scalar>(x: &[f64]) -> Vec<S> {
    x.iter().map(|&v| S::from_real(v)).collect()
}

fn seconds_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn run_pair<K: Kernel>(cfg: &ExperimentConfig, kernel: &K) -> Result<RunRecord> {
    let (targets, sources) = pair_point_sets(cfg)?;
    let x: Vec<K::Scalar> = lift(&make_x(cfg, cfg.n)?);
    let view = BlockView::new(kernel, targets.points(), sources.points(), sources.densities());
    let budget = SampleBudget::square(cfg.k, cfg.epsilon);
    let xv = nalgebra::DVector::from_column_slice(&x);

    let mut record = RunRecord::new(cfg.clone());
    let reference = (cfg.n <= cfg.direct_cap).then(|| {
        let t = Instant::now();
        let mut y = vec![K::Scalar::default(); cfg.n];
        view.apply_exact_into(&x, &mut y);
        (y, seconds_since(t))
    });
    let runs = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| {
            let t = Instant::now();
            let mut rng = derive_stream(realization_seed(cfg.seed, r), &BlockId::default());
            let block = compress_block(&view, &budget, cfg.estimator, &mut rng)?;
            let y = apply_compressed(&block, &xv)?;
            Ok((y.as_slice().to_vec(), seconds_since(t)))
        })
        .collect::<Result<Vec<_>>>()?;
    record.t_hrcm = Some(runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64);
    if let Some((y, t)) = reference {
        record.t_direct = Some(t);
        let ys: Vec<Vec<K::Scalar>> = runs.into_iter().map(|r| r.0).collect();
        record.stats = Some(error_stats(&y, &ys)?);
    }
    Ok(record)
}

fn traversal_config(cfg: &ExperimentConfig) -> TraversalConfig {
    TraversalConfig::new(cfg.eta, cfg.k, cfg.epsilon, cfg.p0).with_estimator(cfg.estimator)
}

fn run_single<K: Kernel>(cfg: &ExperimentConfig, kernel: &K) -> Result<RunRecord> {
    let ps = single_point_set(cfg, cfg.n)?;
    let tree = QuadTree::build(&ps, target_box(cfg), cfg.p0)?;
    let x: Vec<K::Scalar> = lift(&make_x(cfg, cfg.n)?);
    let tcfg = traversal_config(cfg);
    let inter = Interaction::SelfInteraction(&tree);

    let mut record = RunRecord::new(cfg.clone());
    let reference = if cfg.n <= cfg.direct_cap {
        let t = Instant::now();
        let y = direct_summation(kernel, &ps, &ps, &x, true)?;
        record.t_direct = Some(seconds_since(t));
        Some(y)
    } else {
        None
    };
    let mut ys = Vec::with_capacity(cfg.realizations);
    let mut total = 0.0;
    for r in 0..cfg.realizations {
        let t = Instant::now();
        let (y, stats) = hmatrix_product_with_stats(inter, kernel, &x, &tcfg, realization_seed(cfg.seed, r))?;
        total += seconds_since(t);
        record.exec = Some(stats);
        ys.push(y);
    }
    record.t_hrcm = Some(total / cfg.realizations as f64);
    if let Some(y) = reference {
        record.stats = Some(error_stats(&y, &ys)?);
    }
    Ok(record)
}

/// Largest exponent for which the census mode also plans a real traversal.
const TRAVERSAL_CENSUS_MAX_P: u32 = 9;

fn run_census(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let p = exact_log4(cfg.n).expect("validated");
    let mut record = RunRecord::new(cfg.clone());
    record.census = Some(block_census(p, cfg.p0)?);
    if p <= TRAVERSAL_CENSUS_MAX_P {
        let ps = single_point_set(cfg, cfg.n)?;
        let tree = QuadTree::build(&ps, target_box(cfg), cfg.p0)?;
        let plan = plan(Interaction::SelfInteraction(&tree), &traversal_config(cfg))?;
        record.traversal_census = Some(plan.census(p, cfg.p0));
    }
    Ok(record)
}

fn descending_singular_values<S: Scalar>(a: DMatrix<S>) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn run_svd_decay<K: Kernel>(cfg: &ExperimentConfig, kernel: &K) -> Result<RunRecord> {
    let (targets, sources) = pair_point_sets(cfg)?;
    let view = BlockView::new(kernel, targets.points(), sources.points(), sources.densities());
    let mut exact = descending_singular_values(view.to_dense());
    exact.truncate(cfg.sigma_count);

    let mut rng = derive_stream(realization_seed(cfg.seed, 0), &BlockId::default());
    let c = sample_columns(&view, cfg.k, &mut rng)?;
    let core = sample_rows(&c, cfg.k, &mut rng)?;
    let mut sampled = svd_small(&core, SMALL_MATRIX_CAP)?.sigma;
    sampled.truncate(cfg.sigma_count);

    let mut record = RunRecord::new(cfg.clone());
    record.sigma = Some(SigmaDecay { exact, sampled });
    Ok(record)
}

fn run_gram_check<K: Kernel>(cfg: &ExperimentConfig, kernel: &K) -> Result<RunRecord> {
    let c = cfg.k;
    let mut rng = geometry_rng(cfg);
    let dense = DMatrix::from_fn(cfg.n, cfg.n, |_, _| rng.random::<f64>() - 0.5);
    let probs = optimal_probabilities(&dense)?;
    let mut trial_rng = derive_stream(realization_seed(cfg.seed, 0), &BlockId::default());
    let optimal_empirical = empirical_gram_error(&dense, c, &probs, cfg.trials, &mut trial_rng)?;
    let optimal_expectation = gram_error_expectation(&dense, c);

    let targets = PointSet::uniform(cfg.n, target_box(cfg), &mut rng)?;
    let sources = PointSet::uniform(cfg.n, source_box(cfg), &mut rng)?;
    let block = BlockView::new(kernel, targets.points(), sources.points(), sources.densities()).to_dense();
    let geom = SeparatedPairGeometry::new(target_box(cfg).diagonal(), cfg.pair_separation)?;
    let beta = beta_ratio(kernel, &geom)?;
    let uniform = vec![1.0 / cfg.n as f64; cfg.n];
    let uniform_empirical = empirical_gram_error(&block, c, &uniform, cfg.trials, &mut trial_rng)?;

    let mut record = RunRecord::new(cfg.clone());
    record.gram = Some(GramReport {
        c,
        optimal_empirical,
        optimal_expectation,
        uniform_empirical,
        uniform_bound: nearly_optimal_gram_bound(&block, c, beta),
        beta,
    });
    Ok(record)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn run_timing<K: Kernel>(cfg: &ExperimentConfig, kernel: &K) -> Result<RunRecord> {
    let p_max = exact_log4(cfg.n).expect("validated");
    let tcfg = traversal_config(cfg);
    let mut rows = Vec::new();
    for p in cfg.timing_min_p..=p_max {
        let n = 4usize.pow(p);
        let ps = single_point_set(cfg, n)?;
        let x: Vec<K::Scalar> = lift(&make_x(cfg, n)?);
        let t = Instant::now();
        let tree = QuadTree::build(&ps, target_box(cfg), cfg.p0)?;
        hmatrix_product_with_stats(Interaction::SelfInteraction(&tree), kernel, &x, &tcfg, cfg.seed)?;
        let t_hrcm = seconds_since(t);
        let t_direct = if n <= cfg.direct_cap {
            let t = Instant::now();
            direct_summation(kernel, &ps, &ps, &x, true)?;
            Some(seconds_since(t))
        } else {
            None
        };
        rows.push(TimingRow { n, t_hrcm, t_direct });
    }
    let hrcm: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.t_hrcm)).collect();
    let direct: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.t_direct.map(|t| (r.n as f64, t)))
        .collect();
    let mut record = RunRecord::new(cfg.clone());
    record.timing = Some(TimingReport {
        hrcm_slope: log_log_slope(&hrcm),
        direct_slope: log_log_slope(&direct),
        rows,
    });
    Ok(record)
}
