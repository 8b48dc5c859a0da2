//! Acceptance suite: one test per release criterion, each printing a
//! `criterion N: PASS/FAIL` line (visible with `--nocapture`) and asserting
//! its stated tolerance and runtime budget.
//!
//! Run with: `cargo test -p svlab --test acceptance -- --nocapture`

mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::TriangleSampler;
use svlab::assembly::hat_h1_seminorm_sq;
use svlab::infsup::{
    global_infsup, local_infsup, max_cell_aspect, rate_table, refinement_study, InfSupOptions,
    InfSupReport, PressurePair,
};
use svlab::mesh::shishkin_aspect;
use svlab::quadrature::QuadratureRule;
use svlab::stokes::{
    compare_strategies, solve_stokes, CompareRow, ManufacturedSolution, SolveReport,
    StokesOptions,
};
use svlab::triangle::{
    analyze_triangle, check_lac, hat_seminorm_sq, lemma_bounds_report, sorted_children,
    split_point, SplitStrategy,
};
use svlab::{
    clough_tocher_refine, generate_shishkin_mesh, generate_unit_square_mesh, Cell, Diagonal,
    Mesh2D, Point2,
};

fn report(criterion: &str, start: Instant, budget: Duration, detail: &str) {
    let elapsed = start.elapsed();
    println!(
        "criterion {criterion}: PASS ({:.2}s) {detail}",
        elapsed.as_secs_f64()
    );
    assert!(
        elapsed <= budget,
        "criterion {criterion} exceeded its runtime budget: {:.2}s > {:.2}s",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
}

/// Criterion 1: the rate arithmetic reproduces the published decay-rate
/// tables from the published (beta, aspect) pairs, each to 1e-4.
#[test]
fn criterion_01_rate_arithmetic_vs_published_tables() {
    let table1_beta = [0.26301, 0.18898, 0.06402, 0.02137, 0.00713, 0.00238];
    let table1_aspect = [12.32, 36.11, 108.03, 324.01, 972.00, 2916.00];
    let table1_rates = [0.30749, 0.98777, 0.99862, 0.99985, 0.99998];
    let table2_beta = [0.27880, 0.27590, 0.13861, 0.06939, 0.03471, 0.01735];
    let table2_aspect = [10.05, 20.30, 40.71, 81.47, 162.96, 325.94];
    let table2_rates = [0.01493, 0.98959, 0.99739, 0.99934, 0.99984];

    let start = Instant::now();
    let rows1 = rate_table(&table1_beta, &table1_aspect).unwrap();
    let rows2 = rate_table(&table2_beta, &table2_aspect).unwrap();
    let elapsed = start.elapsed();

    let mut failures = Vec::new();
    for (name, rows, printed) in [
        ("table 1", &rows1, &table1_rates[..]),
        ("table 2", &rows2, &table2_rates[..]),
    ] {
        for (k, &expect) in printed.iter().enumerate() {
            let got = rows[k + 1].rate.unwrap();
            let diff = (got - expect).abs();
            if diff > 1e-4 {
                failures.push(format!(
                    "{name} row {}: recomputed {got:.6} vs printed {expect:.5} (diff {diff:.1e})",
                    k + 2
                ));
            }
        }
    }
    assert!(
        elapsed < Duration::from_millis(1),
        "rate arithmetic took {elapsed:?}"
    );
    if failures.is_empty() {
        println!(
            "criterion 1: PASS ({:.6}s) all 10 published rates reproduced to 1e-4",
            elapsed.as_secs_f64()
        );
    } else {
        println!(
            "criterion 1: FAIL — {} of 10 published rates are not reproducible to 1e-4 \
             from the rounded table entries:",
            failures.len()
        );
        for f in &failures {
            println!("  {f}");
        }
        panic!(
            "rates recomputed from the published 5-decimal beta values differ from the printed \
             rates by up to ~1.3e-3; the printed rates were evidently computed from unrounded \
             data, so a 1e-4 match from the rounded inputs is arithmetically impossible for \
             these rows: {failures:?}"
        );
    }
}

/// Criterion 2: no violations of the split-quality bounds, the large-angle
/// inheritance, and the barycenter angle-gap bound on 1000 random triangles
/// with aspect ratios log-uniform in [2, 1e4].
#[test]
fn criterion_02_geometric_lemma_suite() {
    let start = Instant::now();
    let mut sampler = TriangleSampler::new(0x5EED_0002);
    let mut violations = Vec::new();
    for i in 0..1000 {
        let p = sampler.with_aspect_between(2.0, 1e4);
        let bounds = lemma_bounds_report(&p).unwrap();
        if !bounds.all_pass() {
            violations.push(format!("sample {i}: bounds {bounds:?}"));
        }
        let m = analyze_triangle(&p).unwrap();
        let delta_max = PI - m.alpha[2];
        let z0 = split_point(&p, SplitStrategy::Incenter).unwrap();
        let children = sorted_children(&p, z0).unwrap();
        for frac in [0.99, 0.5, 0.1] {
            let delta = frac * delta_max;
            if !check_lac(&p, delta).unwrap() {
                violations.push(format!("sample {i}: parent fails LAC({delta})"));
                continue;
            }
            for (ci, child) in children.iter().enumerate() {
                if !check_lac(child, delta / 2.0).unwrap() {
                    violations.push(format!(
                        "sample {i}: incenter child {ci} fails LAC({}/2)",
                        delta
                    ));
                }
            }
        }
    }
    assert!(
        violations.is_empty(),
        "{} violations: {:?}",
        violations.len(),
        &violations[..violations.len().min(5)]
    );
    report(
        "2",
        start,
        Duration::from_secs(5),
        "1000 samples, zero violations of the aspect, LAC, and angle-gap bounds",
    );
}

/// Criterion 3: split points of the legs-1-and-3 right triangle.
#[test]
fn criterion_03_split_point_coordinates() {
    let start = Instant::now();
    let p = [
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(0.0, 3.0),
    ];
    let inc = split_point(&p, SplitStrategy::Incenter).unwrap();
    assert!((inc.x - 0.41886117).abs() <= 1e-7, "incenter x {}", inc.x);
    assert!((inc.y - 0.41886117).abs() <= 1e-7, "incenter y {}", inc.y);
    let bary = split_point(&p, SplitStrategy::Barycenter).unwrap();
    assert!((bary.x - 1.0 / 3.0).abs() <= 1e-14, "barycenter x {}", bary.x);
    assert!((bary.y - 1.0).abs() <= 1e-14, "barycenter y {}", bary.y);
    report(
        "3",
        start,
        Duration::from_secs(1),
        "incenter (0.41886117, 0.41886117) to 1e-7, barycenter (1/3, 1) to 1e-14",
    );
}

/// Criterion 4: the closed-form hat seminorm equals the FE-quadrature value
/// to 1e-12 relative on 100 random triangles, and the incenter value never
/// exceeds 4 times the aspect ratio.
#[test]
fn criterion_04_hat_seminorm_formula_vs_fe_oracle() {
    let start = Instant::now();
    let mut sampler = TriangleSampler::new(0x5EED_0004);
    let rule = QuadratureRule::assembly();
    for i in 0..100 {
        let mut p = sampler.with_aspect_between(2.0, 1e4);
        if svlab::geometry::signed_area_x2(p[0], p[1], p[2]) < 0.0 {
            p.swap(1, 2);
        }
        let m = analyze_triangle(&p).unwrap();
        for strategy in SplitStrategy::ALL {
            let formula = hat_seminorm_sq(&p, strategy).unwrap();
            let macro_mesh =
                Mesh2D::new(p.to_vec(), vec![Cell::new(0, 1, 2)], None).unwrap();
            let ct = clough_tocher_refine(&macro_mesh, strategy).unwrap();
            let fe = hat_h1_seminorm_sq(&ct, 3, &rule);
            assert!(
                (formula - fe).abs() <= 1e-12 * formula,
                "sample {i} {strategy:?}: formula {formula} vs FE {fe}"
            );
            if strategy == SplitStrategy::Incenter {
                assert!(
                    formula <= 4.0 * m.aspect * (1.0 + 1e-9),
                    "sample {i}: incenter hat {formula} exceeds 4 rho = {}",
                    4.0 * m.aspect
                );
            }
        }
    }
    report(
        "4",
        start,
        Duration::from_secs(2),
        "100 samples, formula == FE quadrature to 1e-12; incenter value <= 4 rho",
    );
}

static STUDIES: OnceLock<(InfSupReport, InfSupReport)> = OnceLock::new();

fn studies() -> &'static (InfSupReport, InfSupReport) {
    STUDIES.get_or_init(|| {
        let opts = InfSupOptions::default();
        let bary = refinement_study(2, SplitStrategy::Barycenter, 4, PressurePair::SvP2P1d, &opts)
            .expect("barycenter study");
        let inc = refinement_study(2, SplitStrategy::Incenter, 4, PressurePair::SvP2P1d, &opts)
            .expect("incenter study");
        (bary, inc)
    })
}

/// Criterion 5: per-level aspect growth of the repeated refinement of the
/// 2x2 mesh sits in [2.8, 3.0] (barycenter) and [1.9, 2.1] (incenter).
#[test]
fn criterion_05_aspect_growth_ratios() {
    let start = Instant::now();
    let (bary, inc) = studies();
    let mut detail = String::new();
    for (name, study, lo, hi) in [
        ("barycenter", bary, 2.8, 3.0),
        ("incenter", inc, 1.9, 2.1),
    ] {
        for w in study.rows.windows(2) {
            let ratio = w[1].aspect / w[0].aspect;
            assert!(
                ratio >= lo && ratio <= hi,
                "{name} level {} -> {}: aspect ratio {ratio} outside [{lo}, {hi}]",
                w[0].level,
                w[1].level
            );
            detail.push_str(&format!("{name} x{ratio:.4} "));
        }
    }
    report("5", start, Duration::from_secs(60), &detail);
}

/// Criterion 6: the measured rates at levels 3 -> 4 are within [0.9, 1.1]
/// for both strategies (beta proportional to 1/aspect), and the incenter
/// beta dominates the barycenter beta at every common level.
#[test]
fn criterion_06_infsup_scaling() {
    let start = Instant::now();
    let (bary, inc) = studies();
    let rb = bary.rows[3].rate.unwrap();
    let ri = inc.rows[3].rate.unwrap();
    assert!(
        (0.9..=1.1).contains(&rb),
        "barycenter rate at level 4: {rb}"
    );
    assert!((0.9..=1.1).contains(&ri), "incenter rate at level 4: {ri}");
    for (b, i) in bary.rows.iter().zip(&inc.rows) {
        assert!(
            i.beta > b.beta,
            "level {}: incenter beta {} not above barycenter beta {}",
            b.level,
            i.beta,
            b.beta
        );
    }
    report(
        "6",
        start,
        Duration::from_secs(600),
        &format!("rates level 3->4: barycenter {rb:.5}, incenter {ri:.5}; beta_inc > beta_bary at all levels"),
    );
}

/// Criterion 7: along the stretched family with aspect 4..64, the product
/// beta_local * aspect stays inside a band of ratio at most 10 for both
/// strategies, with the 8x8 divergence Gram matrix nonsingular throughout.
#[test]
fn criterion_07_local_stability_band() {
    let start = Instant::now();
    let mut detail = String::new();
    for strategy in SplitStrategy::ALL {
        let mut products = Vec::new();
        let mut last_beta = f64::INFINITY;
        for target in [4.0, 8.0, 16.0, 32.0, 64.0] {
            let t = common::apex_height_for_aspect(0.5, target).unwrap();
            let p = [
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.5, t),
            ];
            let aspect = analyze_triangle(&p).unwrap().aspect;
            let r = local_infsup(&p, strategy).unwrap();
            assert_eq!(r.interior_dof_count, 8);
            assert_eq!(
                r.divergence_rank, 8,
                "{strategy:?} aspect {aspect}: G is singular"
            );
            assert!(
                r.beta_local <= last_beta * (1.0 + 1e-9),
                "{strategy:?}: beta_local not monotone at aspect {aspect}"
            );
            last_beta = r.beta_local;
            products.push(r.beta_local * aspect);
        }
        let (lo, hi) = products
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(
            hi / lo <= 10.0,
            "{strategy:?}: beta*aspect band [{lo}, {hi}] wider than 10x"
        );
        detail.push_str(&format!(
            "{} band [{lo:.4}, {hi:.4}] ",
            strategy.name()
        ));
    }
    report("7", start, Duration::from_secs(5), &detail);
}

/// Criterion 8: the P2-P0 constant is uniform in the aspect ratio on the
/// Shishkin family (variation below 2x while the aspect grows severalfold).
#[test]
fn criterion_08_p2p0_uniformity() {
    let start = Instant::now();
    let mut betas = Vec::new();
    let mut aspects = Vec::new();
    for tau in [0.24, 0.12, 0.06, 0.03] {
        let mesh = generate_shishkin_mesh(8, tau).unwrap();
        aspects.push(max_cell_aspect(&mesh).unwrap());
        betas.push(global_infsup(&mesh, PressurePair::P2P0).unwrap());
    }
    let beta_ratio = betas.iter().cloned().fold(0.0f64, f64::max)
        / betas.iter().cloned().fold(f64::INFINITY, f64::min);
    let aspect_growth = aspects.last().unwrap() / aspects.first().unwrap();
    assert!(
        beta_ratio < 2.0,
        "beta varies by {beta_ratio}x over the tau sweep: {betas:?}"
    );
    assert!(
        aspect_growth > 4.0,
        "aspect grew only {aspect_growth}x: {aspects:?}"
    );
    report(
        "8",
        start,
        Duration::from_secs(120),
        &format!("beta ratio {beta_ratio:.3}x while aspect grows {aspect_growth:.2}x"),
    );
}

struct SolveData {
    /// Shishkin comparison, eps = 0.01, N in {8, 16, 32}, both strategies.
    compare: Vec<CompareRow>,
    /// Uniform unit-square meshes with one barycenter refinement, eps = 1.
    uniform: Vec<(usize, SolveReport)>,
    max_solve: Duration,
}

static SOLVES: OnceLock<SolveData> = OnceLock::new();

fn solves() -> &'static SolveData {
    SOLVES.get_or_init(|| {
        let opts = StokesOptions::default();
        let t0 = Instant::now();
        let compare = compare_strategies(
            &[8, 16, 32],
            0.01,
            0.06,
            1.0,
            &SplitStrategy::ALL,
            &opts,
        )
        .expect("comparison sweep");
        let mut max_solve = t0.elapsed() / 6;

        let exact = ManufacturedSolution::new(1.0, 1.0).unwrap();
        let mut uniform = Vec::new();
        for n in [16usize, 32] {
            let parent = generate_unit_square_mesh(n, Diagonal::RightUp).unwrap();
            let mesh = clough_tocher_refine(&parent, SplitStrategy::Barycenter).unwrap();
            let t = Instant::now();
            let solution = solve_stokes(&mesh, &exact, &opts).expect("uniform solve");
            max_solve = max_solve.max(t.elapsed());
            uniform.push((n, solution.report));
        }
        SolveData {
            compare,
            uniform,
            max_solve,
        }
    })
}

/// Criterion 9: every Scott-Vogelius solve in the suite is discretely
/// divergence-free: max |div u_h| at quadrature points stays below
/// 1e-9 * |u_h|_H1.
#[test]
fn criterion_09_divergence_free_solves() {
    let start = Instant::now();
    let data = solves();
    let mut worst = 0.0f64;
    for row in &data.compare {
        let ratio = row.linf_div / row.h1_norm;
        worst = worst.max(ratio);
        assert!(
            ratio <= 1e-9,
            "N={} {}: linf_div/|u|_H1 = {ratio:.3e}",
            row.n,
            row.strategy.name()
        );
        assert!(
            row.solver_residual <= 1e-10,
            "N={} {}: saddle residual {}",
            row.n,
            row.strategy.name(),
            row.solver_residual
        );
    }
    for (n, r) in &data.uniform {
        let ratio = r.linf_div / r.h1_norm;
        worst = worst.max(ratio);
        assert!(ratio <= 1e-9, "uniform n={n}: ratio {ratio:.3e}");
    }
    assert!(
        data.max_solve < Duration::from_secs(30),
        "slowest solve took {:?}",
        data.max_solve
    );
    report(
        "9",
        start,
        Duration::from_secs(240),
        &format!("8 solves, worst linf_div/|u|_H1 = {worst:.2e}"),
    );
}

/// Criterion 10: optimal convergence orders in the smooth regime, and
/// qualitative agreement of the two strategies in the boundary-layer runs.
#[test]
fn criterion_10_convergence_orders_and_strategy_agreement() {
    let start = Instant::now();
    let data = solves();

    let coarse = &data.uniform[0].1;
    let fine = &data.uniform[1].1;
    let order_l2 = (coarse.l2_vel / fine.l2_vel).log2();
    let order_h1 = (coarse.h1_vel / fine.h1_vel).log2();
    let order_prs = (coarse.l2_prs / fine.l2_prs).log2();
    assert!(order_l2 >= 2.7, "L2 velocity order {order_l2}");
    assert!(order_h1 >= 1.7, "H1 velocity order {order_h1}");
    assert!(order_prs >= 1.7, "L2 pressure order {order_prs}");

    // strategy agreement at every N, and monotone decay in N per strategy
    let mut pressure_note = String::new();
    for n in [8usize, 16, 32] {
        let rows: Vec<&CompareRow> = data.compare.iter().filter(|r| r.n == n).collect();
        assert_eq!(rows.len(), 2);
        let ratio_l2 = (rows[0].l2_vel / rows[1].l2_vel).max(rows[1].l2_vel / rows[0].l2_vel);
        let ratio_h1 = (rows[0].h1_vel / rows[1].h1_vel).max(rows[1].h1_vel / rows[0].h1_vel);
        assert!(
            ratio_l2 < 2.0 && ratio_h1 < 2.0,
            "N={n}: velocity errors differ by more than 2x (L2 {ratio_l2}, H1 {ratio_h1})"
        );
        let bary = rows
            .iter()
            .find(|r| r.strategy == SplitStrategy::Barycenter)
            .unwrap();
        let inc = rows
            .iter()
            .find(|r| r.strategy == SplitStrategy::Incenter)
            .unwrap();
        if inc.l2_prs > bary.l2_prs {
            // expected-trend check only; the figures carry no numbers
            pressure_note = format!(" [note: incenter pressure error above barycenter at N={n}]");
        }
    }
    for strategy in SplitStrategy::ALL {
        let errs: Vec<f64> = data
            .compare
            .iter()
            .filter(|r| r.strategy == strategy)
            .map(|r| r.l2_vel)
            .collect();
        assert!(
            errs.windows(2).all(|w| w[1] < w[0]),
            "{strategy:?}: velocity errors not monotone in N: {errs:?}"
        );
    }
    report(
        "10",
        start,
        Duration::from_secs(600),
        &format!(
            "orders L2 {order_l2:.2}, H1 {order_h1:.2}, pressure {order_prs:.2}; strategies within 2x{pressure_note}"
        ),
    );
}

/// Criterion 11: the generated Shishkin meshes attain exactly the closed-form
/// maximum aspect ratio, and tau = 0.06 reproduces the reported setup.
#[test]
fn criterion_11_shishkin_aspect_consistency() {
    let start = Instant::now();
    let mut checked = 0;
    for n in [4usize, 6, 8, 12, 16] {
        for tau in [0.24, 0.12, 0.06, 0.03] {
            let mesh = generate_shishkin_mesh(n, tau).unwrap();
            let measured = max_cell_aspect(&mesh).unwrap();
            let formula = shishkin_aspect(tau);
            assert!(
                (measured - formula).abs() <= 1e-9 * formula,
                "N={n} tau={tau}: measured {measured} vs formula {formula}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 20);

    let rho = shishkin_aspect(0.06);
    assert!((rho - 8.93).abs() < 5e-3, "rho(0.06) = {rho}");
    // one incenter refinement roughly doubles it, landing near the reported 18
    let parent = generate_shishkin_mesh(8, 0.06).unwrap();
    let refined = clough_tocher_refine(&parent, SplitStrategy::Incenter).unwrap();
    let rho_inc = max_cell_aspect(&refined).unwrap();
    assert!(
        (17.0..19.0).contains(&rho_inc),
        "refined aspect {rho_inc} not near 18"
    );
    report(
        "11",
        start,
        Duration::from_secs(1),
        &format!("20 (N, tau) combinations exact; rho(0.06) = {rho:.4}, refined {rho_inc:.2}"),
    );
}
