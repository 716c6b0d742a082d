//! Sampling from the estimated distributions: single values, full vectors by
//! the probability chain, conditionally clamped vectors, and Gibbs sweeps.
//!
//! All randomness flows through [`RandomSource`], a counter-based ChaCha
//! stream that is bit-stable across platforms and splittable into independent
//! substreams keyed by `(master seed, stream index)`, so batch generation
//! parallelizes reproducibly.

use rand_chacha::ChaCha12Rng;
use rand_core::{Rng, SeedableRng};

use crate::centrality::{Evidence, EvidenceValue};
use crate::error::{Error, Result};
use crate::estimation::{beta_from_mean, BetaSpec, EstimationContext, UNIT_EPS};
use crate::graph::GraphView;
use crate::schema::{AttributeKind, Cell};

/// Seedable deterministic uniform stream.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha12Rng,
}

impl RandomSource {
    pub fn from_seed(seed: u64) -> Self {
        RandomSource { rng: ChaCha12Rng::seed_from_u64(seed) }
    }

    /// Independent substream `stream` of the generator seeded with `master`.
    pub fn substream(master: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master);
        rng.set_stream(stream);
        RandomSource { rng }
    }

    /// Uniform draw from `[0, 1)` with 53 random bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via the Marsaglia polar method (spare discarded).
    pub fn next_gaussian(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.next_unit() - 1.0;
            let v = 2.0 * self.next_unit() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }
}

/// Inverse-CDF draw: the smallest index whose cumulative probability reaches
/// the uniform variate.
pub fn sample_pmf(pmf: &[f64], rng: &mut RandomSource) -> usize {
    index_from_unit(pmf, rng.next_unit())
}

pub(crate) fn index_from_unit(pmf: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (i, &p) in pmf.iter().enumerate() {
        cumulative += p;
        if cumulative >= u {
            return i;
        }
    }
    pmf.len() - 1
}

/// Gamma(shape, 1) via the Marsaglia-Tsang squeeze. Shapes below one use the
/// boost `Gamma(shape + 1) * U^(1/shape)`.
pub fn sample_gamma(shape: f64, rng: &mut RandomSource) -> f64 {
    assert!(shape > 0.0 && shape.is_finite(), "gamma shape must be positive");
    if shape < 1.0 {
        let boost = rng.next_unit().max(f64::MIN_POSITIVE).powf(1.0 / shape);
        return sample_gamma(shape + 1.0, rng) * boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = rng.next_gaussian();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.next_unit();
        if u < 1.0 - 0.0331 * x * x * x * x {
            return d * v;
        }
        if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Beta draw via the gamma-ratio construction, clamped interior so the value
/// survives later logs and normalization.
pub fn sample_beta(spec: &BetaSpec, rng: &mut RandomSource) -> f64 {
    let g1 = sample_gamma(spec.p, rng);
    let g2 = sample_gamma(spec.q, rng);
    (g1 / (g1 + g2)).clamp(UNIT_EPS, 1.0 - UNIT_EPS)
}

/// Draws a complete row by the probability chain: the last attribute from its
/// marginal, then each earlier attribute conditioned on the already-drawn
/// suffix. Continuous cells come back denormalized.
pub fn sample_vector(
    view: GraphView<'_>,
    ctx: &EstimationContext<'_>,
    rng: &mut RandomSource,
) -> Result<Vec<Cell>> {
    sample_conditional(view, ctx, &Evidence::new(), rng)
}

/// Chain sampling with the clamped attributes fixed: clamped values appear
/// verbatim in the output and in every conditioning set; only the remaining
/// attributes are drawn, in descending column order.
pub fn sample_conditional(
    view: GraphView<'_>,
    ctx: &EstimationContext<'_>,
    clamped: &Evidence,
    rng: &mut RandomSource,
) -> Result<Vec<Cell>> {
    let d = ctx.schema.len();
    let mut row = vec![Cell::Missing; d];
    let mut evidence = clamped.clone();
    for (attr, value) in clamped.iter() {
        if attr >= d {
            return Err(Error::Schema(format!("clamped attribute {attr} out of range")));
        }
        row[attr] = match value {
            EvidenceValue::Category(i) => Cell::Category(i),
            EvidenceValue::Real(x) => Cell::Real(x),
        };
    }
    for attr in (0..d).rev() {
        if clamped.contains(attr) {
            continue;
        }
        let cell = draw_attribute(view, ctx, &evidence, attr, rng)?;
        match cell {
            Cell::Category(i) => {
                evidence.set(attr, EvidenceValue::Category(i));
            }
            Cell::Real(x) => {
                evidence.set(attr, EvidenceValue::Real(x));
            }
            Cell::Missing => unreachable!("draw always yields a value"),
        }
        row[attr] = cell;
    }
    Ok(row)
}

/// One draw of a single attribute from its conditional (or marginal, when the
/// evidence is empty or disconnected).
fn draw_attribute(
    view: GraphView<'_>,
    ctx: &EstimationContext<'_>,
    evidence: &Evidence,
    attr: usize,
    rng: &mut RandomSource,
) -> Result<Cell> {
    let spec = ctx.schema.attr(attr);
    match &spec.kind {
        AttributeKind::Discrete { .. } => {
            let pmf = ctx.conditional_pmf(view, evidence, attr)?;
            Ok(Cell::Category(sample_pmf(&pmf.probabilities, rng)))
        }
        AttributeKind::Continuous { .. } => {
            let beta_spec = match ctx.conditional_mean(view, evidence, attr)? {
                Some(mean) => beta_from_mean(mean, ctx.hyper.beta),
                None => ctx
                    .marginals
                    .attr(attr)
                    .beta_spec()
                    .expect("continuous attribute carries a Beta marginal"),
            };
            let unit = sample_beta(&beta_spec, rng);
            Ok(Cell::Real(spec.denormalize(unit)))
        }
    }
}

/// How a Gibbs chain is initialized.
#[derive(Debug, Clone)]
pub enum GibbsInit {
    /// One row drawn by the chain sampler.
    ChainSample,
    /// A caller-provided fully observed row.
    Row(Vec<Cell>),
}

#[derive(Debug, Clone)]
pub struct GibbsConfig {
    /// Total sweeps `T`.
    pub sweeps: usize,
    /// Sweeps discarded before keeping samples.
    pub burn_in: usize,
    /// Keep every `thinning`-th sweep after burn-in.
    pub thinning: usize,
    pub init: GibbsInit,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig { sweeps: 0, burn_in: 10, thinning: 1, init: GibbsInit::ChainSample }
    }
}

impl GibbsConfig {
    /// Sweeps needed to keep `n` samples under this burn-in and thinning.
    pub fn for_samples(n: usize) -> Self {
        let base = GibbsConfig::default();
        GibbsConfig { sweeps: base.burn_in + n * base.thinning, ..base }
    }
}

/// Systematic-scan Gibbs sampling: each sweep redraws every attribute in
/// column order from its full conditional given all current other values.
/// Sweeps up to `burn_in` are discarded; afterwards every `thinning`-th sweep
/// is kept. `sweeps <= burn_in` yields an empty sample list.
pub fn gibbs_run(
    view: GraphView<'_>,
    ctx: &EstimationContext<'_>,
    config: &GibbsConfig,
    rng: &mut RandomSource,
) -> Result<Vec<Vec<Cell>>> {
    if config.thinning == 0 {
        return Err(Error::Config("thinning must be at least 1".into()));
    }
    let d = ctx.schema.len();
    let mut row = match &config.init {
        GibbsInit::ChainSample => sample_vector(view, ctx, rng)?,
        GibbsInit::Row(cells) => {
            if cells.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: cells.len() });
            }
            if let Some(missing) = cells.iter().position(|c| c.is_missing()) {
                return Err(Error::MissingValue {
                    attribute: ctx.schema.attr(missing).name.clone(),
                });
            }
            cells.clone()
        }
    };

    let mut kept = Vec::new();
    for sweep in 1..=config.sweeps {
        for attr in 0..d {
            let mut evidence = Evidence::new();
            for (other, cell) in row.iter().enumerate() {
                if other == attr {
                    continue;
                }
                match cell {
                    Cell::Category(i) => {
                        evidence.set(other, EvidenceValue::Category(*i));
                    }
                    Cell::Real(x) => {
                        evidence.set(other, EvidenceValue::Real(*x));
                    }
                    Cell::Missing => unreachable!("gibbs rows stay fully observed"),
                }
            }
            row[attr] = draw_attribute(view, ctx, &evidence, attr, rng)?;
        }
        if sweep > config.burn_in && (sweep - config.burn_in) % config.thinning == 0 {
            kept.push(row.clone());
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{compute_marginals, HyperParams, MarginalModel};
    use crate::graph::BipartiteGraph;
    use crate::schema::{load_dataset, AttributeSpec, Dataset, Schema};
    use crate::SolverConfig;
    use approx::assert_abs_diff_eq;

    fn play_tennis() -> Dataset {
        let schema = Schema::new(vec![
            AttributeSpec::continuous("temperature", 0.0, 100.0, 3),
            AttributeSpec::discrete("humidity", &["high", "normal", "low"]),
            AttributeSpec::discrete("outlook", &["sunny", "overcast", "rainy"]),
            AttributeSpec::discrete("play", &["yes", "no"]),
        ])
        .unwrap();
        let csv = "temperature,humidity,outlook,play\n80,low,sunny,yes\n50,high,rainy,no\n";
        load_dataset(csv, &schema).unwrap()
    }

    struct Fixture {
        dataset: Dataset,
        graph: BipartiteGraph,
        marginals: MarginalModel,
    }

    impl Fixture {
        fn new(dataset: Dataset) -> Self {
            let graph = BipartiteGraph::build(&dataset);
            let marginals = compute_marginals(&dataset).unwrap();
            Fixture { dataset, graph, marginals }
        }

        fn ctx(&self, alpha: f64, beta: f64) -> EstimationContext<'_> {
            EstimationContext {
                schema: &self.dataset.schema,
                layout: self.graph.layout(),
                marginals: &self.marginals,
                hyper: HyperParams { alpha, beta },
                solver: SolverConfig::default(),
            }
        }
    }

    #[test]
    fn degenerate_pmf_always_hits_its_atom() {
        let mut rng = RandomSource::from_seed(0);
        for _ in 0..100 {
            assert_eq!(sample_pmf(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }

    #[test]
    fn inverse_cdf_picks_smallest_index_reaching_u() {
        assert_eq!(index_from_unit(&[0.5, 0.5], 0.49), 0);
        assert_eq!(index_from_unit(&[0.5, 0.5], 0.51), 1);
        assert_eq!(index_from_unit(&[0.2, 0.3, 0.5], 0.2), 0);
        assert_eq!(index_from_unit(&[0.2, 0.3, 0.5], 0.9999), 2);
    }

    #[test]
    fn pmf_draws_match_chi_squared_bound() {
        let pmf = [0.2, 0.3, 0.5];
        let mut rng = RandomSource::from_seed(12);
        let n = 10_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[sample_pmf(&pmf, &mut rng)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(pmf)
            .map(|(&o, p)| {
                let e = p * n as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        // chi-squared df = 2, 99th percentile
        assert!(chi2 < 9.210, "chi2 = {chi2}");
    }

    #[test]
    fn uniform_beta_passes_kolmogorov_smirnov() {
        let spec = BetaSpec { p: 1.0, q: 1.0 };
        let mut rng = RandomSource::from_seed(5);
        let n = 20_000;
        let mut draws: Vec<f64> = (0..n).map(|_| sample_beta(&spec, &mut rng)).collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d_stat: f64 = 0.0;
        for (i, x) in draws.iter().enumerate() {
            let empirical_hi = (i + 1) as f64 / n as f64;
            let empirical_lo = i as f64 / n as f64;
            d_stat = d_stat.max((empirical_hi - x).abs()).max((x - empirical_lo).abs());
        }
        // KS critical value at the 1% level for large n
        assert!(d_stat * (n as f64).sqrt() < 1.628, "D*sqrt(n) = {}", d_stat * (n as f64).sqrt());
    }

    #[test]
    fn beta_mean_matches_worked_parameters() {
        let spec = BetaSpec { p: 4.62, q: 1.38 };
        let mut rng = RandomSource::from_seed(99);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_beta(&spec, &mut rng)).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(mean, 0.77, epsilon = 0.01);
    }

    #[test]
    fn concentrated_beta_matches_moment_oracle() {
        let spec = BetaSpec { p: 50.0, q: 50.0 };
        let expected_var = spec.variance();
        let mut rng = RandomSource::from_seed(7);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_beta(&spec, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var - expected_var).abs() / expected_var < 0.10);
    }

    #[test]
    fn low_shape_gamma_uses_boost_and_keeps_moments() {
        let mut rng = RandomSource::from_seed(3);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_gamma(0.7, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.7).abs() < 0.02, "mean = {mean}");
    }

    #[test]
    fn substreams_are_independent_and_reproducible() {
        let mut a1 = RandomSource::substream(42, 1);
        let mut a2 = RandomSource::substream(42, 1);
        let mut b = RandomSource::substream(42, 2);
        let x1: Vec<f64> = (0..10).map(|_| a1.next_unit()).collect();
        let x2: Vec<f64> = (0..10).map(|_| a2.next_unit()).collect();
        let y: Vec<f64> = (0..10).map(|_| b.next_unit()).collect();
        assert_eq!(x1, x2);
        assert_ne!(x1, y);
    }

    #[test]
    fn single_attribute_chain_draws_follow_marginal() {
        let schema = Schema::new(vec![AttributeSpec::discrete("c", &["a", "b", "c"])]).unwrap();
        let fx = Fixture::new(load_dataset("c\na\na\na\nb\nb\nc\n", &schema).unwrap());
        let ctx = fx.ctx(5.0, 6.0);
        let pmf = fx.marginals.attr(0).pmf().unwrap().to_vec();

        let mut rng = RandomSource::from_seed(1);
        let n = 10_000;
        let mut counts = vec![0usize; 3];
        for _ in 0..n {
            let row = sample_vector(fx.graph.view(), &ctx, &mut rng).unwrap();
            counts[row[0].category().unwrap()] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&pmf)
            .map(|(&o, p)| {
                let e = p * n as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 9.210, "chi2 = {chi2}");
    }

    #[test]
    fn repeated_row_concentrates_generation() {
        // x is drawn last-first from its (variance-clamped) marginal Beta and
        // the discrete cell from the sharpened conditional given x, so large
        // alpha/beta pins the output to the stored row.
        let schema = Schema::new(vec![
            AttributeSpec::discrete("c", &["a", "b"]),
            AttributeSpec::continuous("x", 0.0, 1.0, 3),
        ])
        .unwrap();
        let csv = "c,x\na,0.7\na,0.7\na,0.7\na,0.7\n";
        let fx = Fixture::new(load_dataset(csv, &schema).unwrap());
        let ctx = fx.ctx(50.0, 50.0);
        let mut rng = RandomSource::from_seed(8);
        for _ in 0..50 {
            let row = sample_vector(fx.graph.view(), &ctx, &mut rng).unwrap();
            assert_eq!(row[0], Cell::Category(0));
            assert!((row[1].real().unwrap() - 0.7).abs() < 0.1);
        }
    }

    #[test]
    fn play_tennis_generation_preserves_coupling() {
        let fx = Fixture::new(play_tennis());
        let ctx = fx.ctx(5.0, 6.0);
        let mut rng = RandomSource::from_seed(21);
        let n = 10_000;
        let mut coupled = 0;
        for _ in 0..n {
            let row = sample_vector(fx.graph.view(), &ctx, &mut rng).unwrap();
            let outlook = row[2].category().unwrap();
            let play = row[3].category().unwrap();
            if (outlook, play) == (0, 0) || (outlook, play) == (2, 1) {
                coupled += 1;
            }
        }
        assert!(
            coupled as f64 / n as f64 > 0.9,
            "coupled fraction = {}",
            coupled as f64 / n as f64
        );
    }

    #[test]
    fn fully_clamped_row_returns_unchanged() {
        let fx = Fixture::new(play_tennis());
        let ctx = fx.ctx(5.0, 6.0);
        let mut clamped = Evidence::new();
        clamped.set(0, EvidenceValue::Real(80.0));
        clamped.set(1, EvidenceValue::Category(2));
        clamped.set(2, EvidenceValue::Category(0));
        clamped.set(3, EvidenceValue::Category(0));
        let mut rng = RandomSource::from_seed(4);
        let row = sample_conditional(fx.graph.view(), &ctx, &clamped, &mut rng).unwrap();
        assert_eq!(row[0], Cell::Real(80.0));
        assert_eq!(row[1], Cell::Category(2));
        assert_eq!(row[2], Cell::Category(0));
        assert_eq!(row[3], Cell::Category(0));
    }

    #[test]
    fn clamped_play_drives_outlook() {
        let fx = Fixture::new(play_tennis());
        let ctx = fx.ctx(5.0, 6.0);
        let mut clamped = Evidence::new();
        clamped.set(3, EvidenceValue::Category(0)); // play = yes
        let mut rng = RandomSource::from_seed(17);
        let n = 2000;
        let mut sunny = 0;
        for _ in 0..n {
            let row = sample_conditional(fx.graph.view(), &ctx, &clamped, &mut rng).unwrap();
            assert_eq!(row[3], Cell::Category(0));
            if row[2] == Cell::Category(0) {
                sunny += 1;
            }
        }
        assert!(sunny as f64 / n as f64 > 0.9, "sunny fraction = {}", sunny as f64 / n as f64);
    }

    #[test]
    fn gibbs_with_no_sweeps_past_burn_in_is_empty() {
        let fx = Fixture::new(play_tennis());
        let ctx = fx.ctx(3.0, 6.0);
        let config = GibbsConfig { sweeps: 10, burn_in: 10, thinning: 1, init: GibbsInit::ChainSample };
        let mut rng = RandomSource::from_seed(2);
        let kept = gibbs_run(fx.graph.view(), &ctx, &config, &mut rng).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn single_attribute_gibbs_matches_marginal() {
        let schema = Schema::new(vec![AttributeSpec::discrete("c", &["a", "b", "c"])]).unwrap();
        let fx = Fixture::new(load_dataset("c\na\na\na\nb\nb\nc\n", &schema).unwrap());
        let ctx = fx.ctx(5.0, 6.0);
        let pmf = fx.marginals.attr(0).pmf().unwrap().to_vec();
        let config = GibbsConfig { sweeps: 10 + 10_000, ..Default::default() };
        let mut rng = RandomSource::from_seed(31);
        let kept = gibbs_run(fx.graph.view(), &ctx, &config, &mut rng).unwrap();
        assert_eq!(kept.len(), 10_000);
        let mut counts = vec![0usize; 3];
        for row in &kept {
            counts[row[0].category().unwrap()] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&pmf)
            .map(|(&o, p)| {
                let e = p * kept.len() as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 9.210, "chi2 = {chi2}");
    }

    #[test]
    fn identical_seeds_reproduce_rows_bit_for_bit() {
        let fx = Fixture::new(play_tennis());
        let ctx = fx.ctx(3.0, 6.0);
        let run = |seed| {
            let mut rng = RandomSource::from_seed(seed);
            (0..20)
                .map(|_| sample_vector(fx.graph.view(), &ctx, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
    }
}
