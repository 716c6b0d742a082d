//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers (run with `--nocapture` to see them). Criteria 6 and
//! 10 are asserted at their stated thresholds even though the method cannot
//! meet them on this data; see the test bodies for the measured shortfall.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use approx::assert_abs_diff_eq;
use eigenprob::cluster::{cluster, cluster_iterate, ClusterConfig};
use eigenprob::estimation::{default_alpha_grid, default_beta_grid, log_likelihood};
use eigenprob::model::Model;
use eigenprob::sampling::RandomSource;
use eigenprob::tasks::{generate, loo_cross_validate, outlier_scores, GenerationMethod};
use eigenprob::{
    decode_membership, encode_membership, load_dataset, pairwise_f_measure, parse_schema_file,
    rand_index, resolve_schema, solve_stationary, v_measure, AttributeKind, AttributeSpec,
    BasisCenters, BipartiteGraph, Cell, Dataset, FitResult, HyperParams, Schema, SolverConfig,
};
use nalgebra::DMatrix;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn load_fixture(name: &str) -> Dataset {
    let csv = std::fs::read_to_string(data_dir().join(format!("{name}.csv"))).unwrap();
    let schema_text =
        std::fs::read_to_string(data_dir().join(format!("{name}.schema.json"))).unwrap();
    let entries = parse_schema_file(&schema_text).unwrap();
    let schema = resolve_schema(&entries, &csv).unwrap();
    load_dataset(&csv, &schema).unwrap()
}

/// Credit model fitted once on the default grids (shared across criteria).
fn credit_fit() -> &'static (Model, FitResult) {
    static FIT: OnceLock<(Model, FitResult)> = OnceLock::new();
    FIT.get_or_init(|| {
        let dataset = load_fixture("credit_approval");
        Model::fit(
            dataset,
            SolverConfig::default(),
            &default_alpha_grid(),
            &default_beta_grid(),
            true,
        )
        .unwrap()
    })
}

// ---------------------------------------------------------------------------
// test-side oracles
// ---------------------------------------------------------------------------

fn dense_solve_oracle(graph: &BipartiteGraph, theta: &[f64], config: &SolverConfig) -> Vec<f64> {
    let n = graph.n_objects();
    let size = graph.len();
    let mut w = DMatrix::zeros(size, size);
    for i in 0..n {
        for &(j, x) in graph.matrix().row(i) {
            w[(i, n + j as usize)] = x;
            w[(n + j as usize, i)] = x;
        }
    }
    let scale = if graph.spectral_radius() > 0.0 {
        config.damping / graph.spectral_radius()
    } else {
        0.0
    };
    let lhs = DMatrix::identity(size, size) - w * scale;
    let rhs = DMatrix::from_column_slice(size, 1, theta) * (1.0 - config.damping);
    lhs.lu().solve(&rhs).unwrap().iter().cloned().collect()
}

fn discrete_tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn empirical_pmf(dataset: &Dataset, attr: usize, cardinality: usize) -> Vec<f64> {
    let mut counts = vec![0.0; cardinality];
    for row in dataset.rows() {
        counts[row[attr].category().unwrap()] += 1.0;
    }
    let n: f64 = counts.iter().sum();
    counts.iter().map(|c| c / n).collect()
}

fn normalized_values(dataset: &Dataset, attr: usize) -> Vec<f64> {
    let spec = dataset.schema.attr(attr);
    dataset
        .rows()
        .iter()
        .map(|row| spec.normalize(row[attr].real().unwrap()))
        .collect()
}

fn histogram10(values: &[f64]) -> Vec<f64> {
    let mut bins = vec![0.0; 10];
    for &v in values {
        let idx = ((v * 10.0) as usize).min(9);
        bins[idx] += 1.0;
    }
    bins.iter().map(|c| c / values.len() as f64).collect()
}

/// Worst per-attribute marginal TV between two datasets over one schema:
/// raw pmfs for discrete attributes, 10 equal-width bins on normalized
/// values for continuous ones.
fn worst_marginal_tv(original: &Dataset, generated: &Dataset) -> (f64, String) {
    let mut worst = (0.0, String::new());
    for (attr, spec) in original.schema.attributes.iter().enumerate() {
        let tv = match &spec.kind {
            AttributeKind::Discrete { values } => discrete_tv(
                &empirical_pmf(original, attr, values.len()),
                &empirical_pmf(generated, attr, values.len()),
            ),
            AttributeKind::Continuous { .. } => discrete_tv(
                &histogram10(&normalized_values(original, attr)),
                &histogram10(&normalized_values(generated, attr)),
            ),
        };
        if tv > worst.0 {
            worst = (tv, spec.name.clone());
        }
    }
    worst
}

/// Pair statistic: Cramer's V for discrete-discrete, Pearson otherwise with
/// discrete members as category indices and continuous members normalized.
fn pair_statistic(dataset: &Dataset, a: usize, b: usize) -> f64 {
    let spec_a = dataset.schema.attr(a);
    let spec_b = dataset.schema.attr(b);
    match (&spec_a.kind, &spec_b.kind) {
        (AttributeKind::Discrete { values: va }, AttributeKind::Discrete { values: vb }) => {
            let (ra, rb) = (va.len(), vb.len());
            let mut table = vec![vec![0.0f64; rb]; ra];
            for row in dataset.rows() {
                table[row[a].category().unwrap()][row[b].category().unwrap()] += 1.0;
            }
            let n: f64 = table.iter().flatten().sum();
            let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
            let col_sums: Vec<f64> =
                (0..rb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
            let mut chi2 = 0.0;
            for i in 0..ra {
                for j in 0..rb {
                    let expected = row_sums[i] * col_sums[j] / n;
                    if expected > 0.0 {
                        chi2 += (table[i][j] - expected).powi(2) / expected;
                    }
                }
            }
            let k = ra.min(rb) - 1;
            if k == 0 {
                0.0
            } else {
                (chi2 / (n * k as f64)).sqrt()
            }
        }
        _ => {
            let column = |attr: usize| -> Vec<f64> {
                let spec = dataset.schema.attr(attr);
                dataset
                    .rows()
                    .iter()
                    .map(|row| match row[attr] {
                        Cell::Category(i) => i as f64,
                        Cell::Real(x) => spec.normalize(x),
                        Cell::Missing => unreachable!("fixture rows are fully observed"),
                    })
                    .collect()
            };
            pearson(&column(a), &column(b))
        }
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx.sqrt() * vy.sqrt())
}

fn shannon_entropy(pmf: &[f64]) -> f64 {
    pmf.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

/// Criterion 1: on 100 random graphs with N+M <= 30, the power-iteration
/// solution matches a dense linear solve within L-inf 1e-8, in under 5 s.
#[test]
fn criterion_01_solver_matches_dense_oracle() {
    let start = Instant::now();
    let mut rng = RandomSource::from_seed(2024);
    let dampings = [0.15, 0.5, 0.85];
    let mut worst: f64 = 0.0;

    for case in 0..100 {
        // random mixed schema within the size budget
        let n_attrs = 2 + (rng.next_unit() * 3.0) as usize;
        let mut attrs = Vec::new();
        for a in 0..n_attrs {
            if rng.next_unit() < 0.4 {
                attrs.push(AttributeSpec::continuous(format!("x{a}"), 0.0, 1.0, 3));
            } else {
                let cardinality = 2 + (rng.next_unit() * 3.0) as usize;
                let values: Vec<String> =
                    (0..cardinality).map(|v| format!("v{v}")).collect();
                let refs: Vec<&str> = values.iter().map(|s| s.as_str()).collect();
                attrs.push(AttributeSpec::discrete(format!("c{a}"), &refs));
            }
        }
        let schema = Schema::new(attrs).unwrap();
        let m: usize = schema.attributes.iter().map(|a| a.width()).sum();
        let n_rows = 2 + (rng.next_unit() * ((30usize.saturating_sub(m)).max(3) as f64 - 2.0))
            as usize;

        let rows: Vec<Vec<Cell>> = (0..n_rows)
            .map(|_| {
                schema
                    .attributes
                    .iter()
                    .map(|spec| match &spec.kind {
                        AttributeKind::Discrete { values } => {
                            Cell::Category((rng.next_unit() * values.len() as f64) as usize
                                % values.len())
                        }
                        AttributeKind::Continuous { .. } => Cell::Real(rng.next_unit()),
                    })
                    .collect()
            })
            .collect();
        let dataset = Dataset::new(schema, rows).unwrap();
        let graph = BipartiteGraph::build(&dataset);
        assert!(graph.len() <= 30 + 4, "graph size {} out of budget", graph.len());

        // random nonnegative personalization, normalized
        let mut theta: Vec<f64> = (0..graph.len())
            .map(|_| if rng.next_unit() < 0.5 { 0.0 } else { rng.next_unit() })
            .collect();
        let sum: f64 = theta.iter().sum();
        if sum == 0.0 {
            theta[0] = 1.0;
        } else {
            theta.iter_mut().for_each(|x| *x /= sum);
        }

        let config = SolverConfig { damping: dampings[case % 3], ..SolverConfig::default() };
        let solved = solve_stationary(graph.view(), &theta, &config).unwrap();
        assert!(solved.converged);
        let oracle = dense_solve_oracle(&graph, &theta, &config);
        for (got, want) in solved.values.iter().zip(&oracle) {
            worst = worst.max((got - want).abs());
        }
    }
    let elapsed = start.elapsed();
    println!(
        "criterion 1: PASS - worst L-inf error {worst:.2e} over 100 graphs in {:.2?}",
        elapsed
    );
    assert!(worst <= 1e-8, "worst L-inf error {worst}");
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
}

/// Criterion 2: decode(encode(u)) = u within 1e-12 for 10^4 random u and
/// k in {2, 3, 5}.
#[test]
fn criterion_02_representation_is_lossless() {
    let mut rng = RandomSource::from_seed(7);
    let mut worst: f64 = 0.0;
    for k in [2usize, 3, 5] {
        let centers = BasisCenters::new(k);
        for _ in 0..10_000 {
            let u = rng.next_unit();
            let w = encode_membership(u, k);
            let back = decode_membership(&w, &centers).unwrap();
            worst = worst.max((back - u).abs());
        }
    }
    println!("criterion 2: PASS - worst roundtrip error {worst:.2e}");
    assert!(worst <= 1e-12);
}

/// Criterion 3: the sharpening identities and the worked alpha = 2 example.
#[test]
fn criterion_03_sharpening_identities_and_worked_example() {
    let m = [0.5, 0.3, 0.2];
    let c = [0.47, 0.34, 0.19];

    let at_zero = eigenprob::estimation::sharpen_pmf(&c, &m, 0.0);
    assert_eq!(at_zero, m.to_vec(), "alpha = 0 must return marginals exactly");

    let at_one = eigenprob::estimation::sharpen_pmf(&c, &m, 1.0);
    for (got, want) in at_one.iter().zip(c) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }

    let at_two = eigenprob::estimation::sharpen_pmf(&c, &m, 2.0);
    let expected = [0.43845, 0.38242, 0.17913];
    for (got, want) in at_two.iter().zip(expected) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-4);
    }
    println!(
        "criterion 3: PASS - alpha=2 sharpening gives [{:.5}, {:.5}, {:.5}]",
        at_two[0], at_two[1], at_two[2]
    );
}

/// Criterion 4: leave-one-out classification accuracy on Australian Credit at
/// the fitted hyperparameters lands in [83.7%, 87.7%].
#[test]
fn criterion_04_credit_classification_accuracy() {
    let start = Instant::now();
    let (model, fit) = credit_fit();
    let target = model.schema().index_of("class").unwrap();
    let report = loo_cross_validate(model, target).unwrap();
    let accuracy = report.accuracy();
    let elapsed = start.elapsed();
    println!(
        "criterion 4: PASS - LOO accuracy {:.4} ({}/{}) at (alpha={}, beta={}) in {:.2?}",
        accuracy,
        report.correct,
        report.predictions.len(),
        fit.hyper.alpha,
        fit.hyper.beta,
        elapsed
    );
    assert!(
        (0.837..=0.877).contains(&accuracy),
        "accuracy {accuracy} outside [0.837, 0.877]"
    );
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
}

/// Criterion 5: the likelihood surface is finite on the default grid, the
/// argmax lies in alpha [5,13] x beta [3,10], and the cached sweep equals a
/// naive per-point recomputation within 1e-10 on a toy.
#[test]
fn criterion_05_mle_surface() {
    let (_, fit) = credit_fit();
    assert!(
        fit.surface.iter().all(|p| p.log_likelihood.is_finite()),
        "non-finite surface value"
    );
    assert!(
        (5.0..=13.0).contains(&fit.hyper.alpha),
        "alpha {} outside [5, 13]",
        fit.hyper.alpha
    );
    assert!(
        (3.0..=10.0).contains(&fit.hyper.beta),
        "beta {} outside [3, 10]",
        fit.hyper.beta
    );

    // cache equivalence on the modified Play-Tennis toy
    let toy = load_fixture("play_tennis_modified");
    let graph = BipartiteGraph::build(&toy);
    let marginals = eigenprob::compute_marginals(&toy).unwrap();
    let solver = SolverConfig::default();
    let toy_fit = eigenprob::fit_hyperparams(
        &graph,
        &toy,
        &marginals,
        solver,
        &[0.0, 2.0, 5.0],
        &[1.0, 6.0, 12.0],
        true,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for point in &toy_fit.surface {
        let ctx = eigenprob::EstimationContext {
            schema: &toy.schema,
            layout: graph.layout(),
            marginals: &marginals,
            hyper: HyperParams { alpha: point.alpha, beta: point.beta },
            solver,
        };
        let naive = log_likelihood(&graph, &toy, &ctx, true).unwrap();
        worst = worst.max((naive - point.log_likelihood).abs());
    }
    println!(
        "criterion 5: PASS - argmax (alpha={}, beta={}), surface finite, cache vs naive {:.2e}",
        fit.hyper.alpha, fit.hyper.beta, worst
    );
    assert!(worst <= 1e-10, "cache deviates from naive recompute by {worst}");
}

/// Criterion 6: generation fidelity on Australian Credit - marginal TV <= 0.05
/// per attribute and top-10 pair statistics within 0.15.
///
/// This criterion does not hold for this method on this data; the assertions
/// are kept at the stated thresholds and the measured values are printed.
/// The data's most correlated pairs are exact column redundancies (Cramer's
/// V = 1.0 for A4-A5) and additive evidence cannot reproduce them; see
/// the accompanying notes for the full sweep evidence.
#[test]
fn criterion_06_generation_fidelity() {
    let (model, _) = credit_fit();
    let original = model.dataset();
    let generated = generate(model, 5000, GenerationMethod::Chain, 42).unwrap();

    let (worst_tv, worst_attr) = worst_marginal_tv(original, &generated);

    // ten most correlated pairs in the original data
    let d = original.schema.len();
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            pairs.push((a, b, pair_statistic(original, a, b)));
        }
    }
    pairs.sort_by(|x, y| y.2.abs().partial_cmp(&x.2.abs()).unwrap());
    let mut worst_pair_diff = 0.0f64;
    let mut worst_pair = String::new();
    for &(a, b, orig_stat) in pairs.iter().take(10) {
        let gen_stat = pair_statistic(&generated, a, b);
        let diff = (orig_stat - gen_stat).abs();
        println!(
            "  pair {}-{}: original {orig_stat:+.3}, generated {gen_stat:+.3}, |diff| {diff:.3}",
            original.schema.attr(a).name,
            original.schema.attr(b).name
        );
        if diff > worst_pair_diff {
            worst_pair_diff = diff;
            worst_pair = format!(
                "{}-{}",
                original.schema.attr(a).name,
                original.schema.attr(b).name
            );
        }
    }
    println!(
        "criterion 6: worst marginal TV {worst_tv:.4} ({worst_attr}), worst top-10 pair diff {worst_pair_diff:.4} ({worst_pair})"
    );
    assert!(
        worst_tv <= 0.05,
        "per-attribute marginal TV {worst_tv:.4} on {worst_attr} exceeds 0.05"
    );
    assert!(
        worst_pair_diff <= 0.15,
        "top-10 pair statistic difference {worst_pair_diff:.4} on {worst_pair} exceeds 0.15"
    );
}

/// Criterion 7: on the modified Play-Tennis data, generated continuous spread
/// is strictly larger at beta = 6 than at beta = 12, and Outlook entropy is
/// strictly larger at alpha = 3 than at alpha = 5 (500 samples each).
#[test]
fn criterion_07_spread_orderings() {
    let toy = load_fixture("play_tennis_modified");
    let solver = SolverConfig::default();
    let generate_at = |alpha: f64, beta: f64| -> Dataset {
        let model =
            Model::from_dataset(toy.clone(), HyperParams { alpha, beta }, solver).unwrap();
        generate(&model, 500, GenerationMethod::Chain, 11).unwrap()
    };

    let wide = generate_at(3.0, 6.0);
    let narrow = generate_at(3.0, 12.0);
    for attr in [0usize, 1] {
        let name = &toy.schema.attr(attr).name;
        let spread_6 = std_dev(
            &wide.rows().iter().map(|r| r[attr].real().unwrap()).collect::<Vec<_>>(),
        );
        let spread_12 = std_dev(
            &narrow.rows().iter().map(|r| r[attr].real().unwrap()).collect::<Vec<_>>(),
        );
        println!("  {name}: std at beta=6 {spread_6:.3}, at beta=12 {spread_12:.3}");
        assert!(
            spread_6 > spread_12,
            "{name}: spread at beta=6 ({spread_6}) not larger than at beta=12 ({spread_12})"
        );
    }

    let soft = generate_at(3.0, 12.0);
    let sharp = generate_at(5.0, 12.0);
    let outlook = 2;
    let entropy_of = |ds: &Dataset| {
        shannon_entropy(&empirical_pmf(ds, outlook, toy.schema.attr(outlook).width()))
    };
    let (e3, e5) = (entropy_of(&soft), entropy_of(&sharp));
    println!("criterion 7: PASS - outlook entropy at alpha=3 {e3:.4}, at alpha=5 {e5:.4}");
    assert!(e3 > e5, "entropy at alpha=3 ({e3}) not larger than at alpha=5 ({e5})");
}

/// Criterion 8: clustering Australian Credit (class column excluded from the
/// graph), best of 10 seeded restarts across damping {0.5, 0.7, 0.85}
/// reaches V >= 0.24 and Rand >= 0.64 against the class labels, in under
/// two minutes.
#[test]
fn criterion_08_credit_clustering() {
    let start = Instant::now();
    let dataset = load_fixture("credit_approval");
    let class_idx = dataset.schema.index_of("class").unwrap();
    let truth: Vec<usize> =
        dataset.rows().iter().map(|r| r[class_idx].category().unwrap()).collect();
    let features = dataset.without_attribute(class_idx).unwrap();
    let graph = BipartiteGraph::build(&features);

    let mut best: Option<(f64, f64, f64, f64)> = None; // (v, rand, f, damping)
    for &damping in &[0.5, 0.7, 0.85] {
        let config = ClusterConfig { damping, ..ClusterConfig::default() };
        for restart in 0..10u64 {
            let mut rng = RandomSource::substream(97, restart);
            let state = cluster(graph.view(), 2, &config, &mut rng).unwrap();
            let labels = state.hard_labels();
            let v = v_measure(&labels, &truth).unwrap();
            let rand = rand_index(&labels, &truth).unwrap();
            let f = pairwise_f_measure(&labels, &truth).unwrap();
            if best.map_or(true, |(bv, ..)| v > bv) {
                best = Some((v, rand, f, damping));
            }
        }
    }
    let (v, rand, f, damping) = best.unwrap();
    let elapsed = start.elapsed();
    println!(
        "criterion 8: PASS - best run (d={damping}): V {v:.4}, Rand {rand:.4}, F {f:.4} in {:.2?}",
        elapsed
    );
    assert!(v >= 0.24, "V-measure {v} below 0.24");
    assert!(rand >= 0.64, "Rand index {rand} below 0.64");
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
}

/// Criterion 9: membership rows and personalization vectors stay normalized
/// through every iteration, a converged state is a one-step fixed point, and
/// K = 1 yields all-ones memberships.
#[test]
fn criterion_09_clustering_invariants() {
    let toy = load_fixture("play_tennis_modified");
    let graph = BipartiteGraph::build(&toy);
    let config = ClusterConfig { damping: 0.7, ..ClusterConfig::default() };

    let mut rng = RandomSource::from_seed(3);
    let state = cluster(graph.view(), 3, &config, &mut rng).unwrap();
    assert!(state.converged);
    assert!(
        state.max_membership_sum_error <= 1e-10,
        "membership sums drift by {}",
        state.max_membership_sum_error
    );
    assert!(
        state.max_theta_sum_error <= 1e-10,
        "theta sums drift by {}",
        state.max_theta_sum_error
    );

    let extra = cluster_iterate(graph.view(), &state.thetas, &config).unwrap();
    assert!(
        extra.delta <= config.tolerance * 1.001,
        "one-step residual {} above tolerance {}",
        extra.delta,
        config.tolerance
    );

    let mut rng = RandomSource::from_seed(4);
    let single = cluster(graph.view(), 1, &config, &mut rng).unwrap();
    assert!(single.memberships.iter().all(|row| row == &vec![1.0]));
    println!(
        "criterion 9: PASS - sum drifts {:.2e}/{:.2e}, one-step residual {:.2e}",
        state.max_membership_sum_error, state.max_theta_sum_error, extra.delta
    );
}

/// Criterion 10: Gibbs kept-sample marginals vs chain-sampler marginals on
/// the (modified) Play-Tennis toy, TV <= 0.05 with 5,000 rows each.
///
/// The model's full conditionals come from independent solves and are not
/// mutually compatible, so the Gibbs pseudo-stationary law differs from the
/// chain-rule law on the continuous attributes; the assertion is kept at the
/// stated threshold and the measured per-attribute TVs are printed.
#[test]
fn criterion_10_gibbs_chain_consistency() {
    let toy = load_fixture("play_tennis_modified");
    let model = Model::from_dataset(
        toy.clone(),
        HyperParams { alpha: 3.0, beta: 6.0 },
        SolverConfig::default(),
    )
    .unwrap();

    let chain = generate(&model, 5000, GenerationMethod::Chain, 5).unwrap();
    let gibbs =
        generate(&model, 5000, GenerationMethod::Gibbs { burn_in: 10, thinning: 1 }, 5).unwrap();

    let mut worst = (0.0f64, String::new());
    for (attr, spec) in toy.schema.attributes.iter().enumerate() {
        let tv = match &spec.kind {
            AttributeKind::Discrete { values } => discrete_tv(
                &empirical_pmf(&chain, attr, values.len()),
                &empirical_pmf(&gibbs, attr, values.len()),
            ),
            AttributeKind::Continuous { .. } => discrete_tv(
                &histogram10(&normalized_values(&chain, attr)),
                &histogram10(&normalized_values(&gibbs, attr)),
            ),
        };
        println!("  {}: chain-vs-gibbs TV {tv:.4}", spec.name);
        if tv > worst.0 {
            worst = (tv, spec.name.clone());
        }
    }
    println!("criterion 10: worst TV {:.4} ({})", worst.0, worst.1);
    assert!(
        worst.0 <= 0.05,
        "chain-vs-gibbs marginal TV {:.4} on {} exceeds 0.05",
        worst.0,
        worst.1
    );
}

/// Criterion 11: the contrarian toy row is the unique minimum LOO score, and
/// the credit score histogram has a low tail at least 2 nats below the
/// median.
#[test]
fn criterion_11_outlier_sanity() {
    let schema = Schema::new(vec![
        AttributeSpec::discrete("a", &["x", "y"]),
        AttributeSpec::discrete("b", &["u", "v"]),
        AttributeSpec::discrete("c", &["s", "t"]),
    ])
    .unwrap();
    let csv = "a,b,c\nx,u,s\nx,u,s\nx,u,s\nx,u,s\nx,u,s\ny,v,t\n";
    let toy = load_dataset(csv, &schema).unwrap();
    let model = Model::from_dataset(
        toy,
        HyperParams { alpha: 4.0, beta: 6.0 },
        SolverConfig::default(),
    )
    .unwrap();
    let report = outlier_scores(&model, None, 10).unwrap();
    let mut ranked: Vec<(usize, f64)> = report.scores.iter().cloned().enumerate().collect();
    ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    assert_eq!(ranked[0].0, 5, "contrarian row is not the minimum");
    assert!(ranked[0].1 < ranked[1].1, "contrarian minimum is not unique");

    let (model, _) = credit_fit();
    let report = outlier_scores(model, None, 30).unwrap();
    let mut scores = report.scores.clone();
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = scores[scores.len() / 2];
    let bottom = eigenprob::tasks::percentile(&scores, 0.01);
    let gap = median - bottom;
    println!("criterion 11: PASS - credit tail gap {gap:.2} nats (median {median:.2}, p01 {bottom:.2})");
    assert!(gap >= 2.0, "bottom-percentile gap {gap} below 2 nats");
}

/// Criterion 12: byte-identical `generate --seed 7` runs, and a model
/// save/load round trip preserves every prediction bit for bit.
#[test]
fn criterion_12_determinism() {
    use eigenprob::model::{model_from_file, save_model, DatasetSource};
    use eigenprob::tasks::classify;

    // CLI-level: two runs with the same seed produce identical bytes
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    let bin = env!("CARGO_BIN_EXE_eigenprob");
    let fit_out = std::process::Command::new(bin)
        .args([
            "fit",
            "--data",
            data_dir().join("play_tennis_modified.csv").to_str().unwrap(),
            "--schema",
            data_dir().join("play_tennis_modified.schema.json").to_str().unwrap(),
            "--alpha",
            "3",
            "--beta",
            "6",
            "--out",
            model_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(fit_out.status.success(), "fit failed: {fit_out:?}");

    let generate_once = |path: &Path| {
        let out = std::process::Command::new(bin)
            .args([
                "generate",
                "--model",
                model_path.to_str().unwrap(),
                "-n",
                "200",
                "--seed",
                "7",
                "--out",
                path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "generate failed: {out:?}");
        std::fs::read(path).unwrap()
    };
    let first = generate_once(&dir.path().join("gen1.csv"));
    let second = generate_once(&dir.path().join("gen2.csv"));
    assert_eq!(first, second, "generate --seed 7 runs differ");

    // library-level: save/load round trip preserves predictions bit for bit
    let toy = load_fixture("play_tennis_modified");
    let model = Model::from_dataset(
        toy.clone(),
        HyperParams { alpha: 3.0, beta: 6.0 },
        SolverConfig::default(),
    )
    .unwrap();
    let csv = model.dataset().to_csv().unwrap();
    let file = model.to_model_file(DatasetSource::Embedded { csv });
    let file_path = dir.path().join("roundtrip.json");
    save_model(&file, &file_path).unwrap();
    let restored = model_from_file(eigenprob::load_model(&file_path).unwrap(), None).unwrap();

    let target = toy.schema.index_of("play").unwrap();
    for row in toy.rows() {
        let mut query = row.to_vec();
        query[target] = Cell::Missing;
        let before = classify(&model, &query, target).unwrap();
        let after = classify(&restored, &query, target).unwrap();
        assert_eq!(before.predicted, after.predicted);
        assert_eq!(
            before.pmf.probabilities, after.pmf.probabilities,
            "round trip changed probabilities"
        );
    }
    println!("criterion 12: PASS - byte-identical generation and bit-exact round trip");
}
