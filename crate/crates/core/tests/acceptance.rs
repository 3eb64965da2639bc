//! Acceptance criteria AC1 to AC11. Each test prints one
//! `ACCEPTANCE ACn PASS|FAIL` line to stderr, bypassing output capture.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tiltei_core::assembly::{difference_operator, element_integral, Mesh};
use tiltei_core::beam::kernel::rotation_uniform_ss;
use tiltei_core::beam::{
    AdjointJacobian, AnalyticSpan, AxleTrain, BeamSystem, FeForward, FeModel, ForwardModel, Support,
};
use tiltei_core::diagnostics::{
    bias_variance_sweep, fisher_information, informativeness_curve, informativeness_from_rows, per_sensor_fisher,
    BiasVarianceConfig,
};
use tiltei_core::inference::{
    forward_in_params, posterior_linear, Correlation, GnControls, NoiseModel, NonlinearProblem, ParamMap,
    Parameterization, PriorSpec, TikhonovSolver,
};
use tiltei_core::io::{
    export_results, ingest_tilt_csv, load_config, parse_config, run_inversion, simulate_from_config,
    write_trace_csv, ResultBundle, TiltTrace,
};
use tiltei_core::linalg::linspace;
use tiltei_core::synthetic::{exact_rotations, make_truth, noise_sweep_study, NoiseStudyConfig};

fn report(id: &str, pass: bool, elapsed: Duration, detail: &str) {
    let line = format!(
        "ACCEPTANCE {id} {} ({:.1} s): {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn finish(id: &str, pass: bool, start: Instant, limit_s: f64, detail: String) {
    let elapsed = start.elapsed();
    let in_time = elapsed.as_secs_f64() < limit_s;
    let detail = if in_time { detail } else { format!("{detail}; exceeded {limit_s} s") };
    report(id, pass && in_time, elapsed, &detail);
    assert!(pass && in_time, "{id}: {detail}");
}

fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.amax();
    if scale == 0.0 {
        a.amax()
    } else {
        (a - b).amax() / scale
    }
}

/// Dense `Δ^order` with binomial stencils, written independently of the library.
fn difference_oracle(order: usize, n: usize) -> DMatrix<f64> {
    let mut stencil = vec![1.0];
    for _ in 0..order {
        let mut next = vec![0.0; stencil.len() + 1];
        for (i, c) in stencil.iter().enumerate() {
            next[i] -= c;
            next[i + 1] += c;
        }
        stencil = next;
    }
    let rows = n - order;
    DMatrix::from_fn(rows, n, |i, j| if j >= i && j - i <= order { stencil[j - i] } else { 0.0 })
}

#[test]
fn ac01_map_equals_tikhonov() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC01);
    let (mut worst_tik, mut worst_oracle) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let n: usize = rng.random_range(3..=64);
        let m: usize = n + rng.random_range(0..=n);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random::<f64>() - 0.5);
        let y = DVector::from_fn(m, |_, _| rng.random::<f64>() - 0.5);
        let center = DVector::from_fn(n, |_, _| rng.random::<f64>());
        let order = i % 3;
        let sigma2 = 10f64.powf(rng.random_range(-4.0..0.0));
        let tau = 10f64.powf(rng.random_range(-2.0..2.0));
        let rho = if i % 2 == 0 { 0.0 } else { rng.random_range(-0.6..0.6) };
        let corr = if rho == 0.0 { Correlation::Identity } else { Correlation::Ar1 { rho, block: m } };
        let noise = NoiseModel::new(sigma2, corr).unwrap();
        let prior = PriorSpec::new(Parameterization::LinearCompliance, order, tau, center.clone()).unwrap();

        let post = posterior_linear(&a, &y, &noise, &prior).unwrap();
        let tik = TikhonovSolver::new(&a, &noise, order, &center, sigma2 * tau).unwrap().solve(&y);
        worst_tik = worst_tik.max((&post.mean - &tik).norm() / tik.norm());

        let gamma = DMatrix::from_fn(m, m, |r, c| rho.powi((r as i32 - c as i32).abs()));
        let gi = gamma.try_inverse().unwrap();
        let d = difference_oracle(order, n);
        let dtd = d.transpose() * &d;
        let q = a.transpose() * &gi * &a / sigma2 + &dtd * tau;
        let rhs = a.transpose() * &gi * &y / sigma2 + &dtd * &center * tau;
        let oracle = q.lu().solve(&rhs).unwrap();
        worst_oracle = worst_oracle.max((&post.mean - &oracle).norm() / oracle.norm());
    }
    let pass = worst_tik <= 1e-10 && worst_oracle <= 1e-10;
    finish(
        "AC1",
        pass,
        start,
        10.0,
        format!("100 instances, max rel |MAP - Tikhonov| = {worst_tik:.2e}, vs dense normal equations {worst_oracle:.2e} (tol 1e-10)"),
    );
}

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Exact `(∫ K, ∫ |K|)` over `[a, b]` in rational arithmetic. On each piece
/// between the cuts at `r` and `z` the kernel is a product of two affine
/// factors of fixed sign, so its antiderivative is a cubic.
fn exact_kernel_integral(span: f64, r: f64, z: f64, p: f64, a: f64, b: f64) -> (BigRational, BigRational) {
    let (l, r, z, p) = (q(span), q(r), q(z), q(p));
    let (a, b) = (q(a), q(b));
    let mut cuts = vec![a.clone()];
    for c in [&r, &z] {
        if *c > a && *c < b {
            cuts.push(c.clone());
        }
    }
    cuts.push(b);
    cuts.sort();
    let (one, two, three) = (BigRational::one(), BigRational::from_integer(2.into()), BigRational::from_integer(3.into()));
    let (mut total, mut l1) = (BigRational::zero(), BigRational::zero());
    for w in cuts.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        let mid = (lo + hi) / &two;
        // m(s) = alpha + beta s, M(s) = gamma + delta s
        let alpha = if mid >= r { one.clone() } else { BigRational::zero() };
        let beta = -&one / &l;
        let (gamma, delta) = if mid < z {
            (BigRational::zero(), &p * (&l - &z) / &l)
        } else {
            (&p * &z, -(&p * &z) / &l)
        };
        let d1 = hi - lo;
        let d2 = (hi * hi - lo * lo) / &two;
        let d3 = (hi * hi * hi - lo * lo * lo) / &three;
        let piece = &alpha * &gamma * d1 + (&alpha * &delta + &beta * &gamma) * d2 + &beta * &delta * d3;
        l1 += piece.abs();
        total += piece;
    }
    (total, l1)
}

#[test]
fn ac02_element_integrals_match_quadrature() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC02);
    let (mut worst, mut worst_l1) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let span = rng.random_range(1.0..50.0);
        let r = rng.random_range(0.0..=span);
        let z = rng.random_range(0.0..span);
        let p = rng.random_range(1.0..1e5);
        let (x0, x1) = (rng.random_range(0.0..span), rng.random_range(0.0..span));
        let (a, b) = if x0 < x1 { (x0, x1) } else { (x1, x0) };
        let got = element_integral(span, r, z, p, a, b).unwrap();
        let (want, l1) = exact_kernel_integral(span, r, z, p, a, b);
        if l1.is_zero() {
            continue;
        }
        let err = (q(got) - &want).abs();
        worst_l1 = worst_l1.max((&err / &l1).to_f64().unwrap());
        if !want.is_zero() {
            worst = worst.max((&err / want.abs()).to_f64().unwrap());
        }
    }
    let exact = element_integral(1.0, 0.0, 0.5, 1.0, 0.0, 1.0).unwrap();
    let exact_err = (exact - 1.0 / 16.0).abs() * 16.0;
    let pass = worst <= 1e-12 && worst_l1 <= 1e-12 && exact_err <= 1e-12;
    finish(
        "AC2",
        pass,
        start,
        5.0,
        format!(
            "1000 triples: max rel err {worst:.2e} (vs |I|), {worst_l1:.2e} (vs ∫|K|); full-span support rotation {exact:.17} vs 1/16, rel {exact_err:.1e}"
        ),
    );
}

#[test]
fn ac03_fe_matches_oracle_and_reciprocity() {
    let start = Instant::now();
    let (l, ei, p) = (12.0, 3e9, 5e4);
    let system = BeamSystem::simply_supported(l).unwrap();
    let mesh = Mesh::uniform(l, 12).unwrap();
    let loads: Vec<f64> = (1..12).map(|k| k as f64).collect();
    let stations = [0.0, 2.5, 3.0, 7.25, 11.9, 12.0];
    let train = AxleTrain::point_load(p, loads.clone()).unwrap();
    let fe = FeForward::new(&system, &mesh, &stations, &train, Arc::new(AdjointJacobian)).unwrap();
    let got = fe.rotation_matrix(&DVector::from_element(12, 1.0 / ei)).unwrap();
    let want = DMatrix::from_fn(stations.len(), loads.len(), |i, k| {
        rotation_uniform_ss(l, stations[i], loads[k], p, 1.0 / ei).unwrap()
    });
    let oracle_err = max_rel(&got, &want);

    let mut rng = ChaCha8Rng::seed_from_u64(0xAC03);
    let mut worst_recip = 0.0f64;
    for _ in 0..200 {
        let (l1, l2) = (rng.random_range(5.0..25.0), rng.random_range(5.0..25.0));
        let k = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(6.0..10.0));
        let supports = vec![Support::spring(k(&mut rng)), Support::PINNED, Support::spring(k(&mut rng))];
        let system = BeamSystem::new(vec![l1, l2], supports, None).unwrap();
        let mut breaks: Vec<f64> = linspace(0.0, l1, rng.random_range(3..8));
        breaks.extend(linspace(l1, l1 + l2, rng.random_range(3..8)).into_iter().skip(1));
        let mesh = Mesh::from_breakpoints(breaks).unwrap();
        let v = DVector::from_fn(mesh.n_elements(), |_, _| 1.0 / 10f64.powf(rng.random_range(8.5..10.5)));
        let (xa, xb) = (rng.random_range(0.1..l1 + l2 - 0.1), rng.random_range(0.1..l1 + l2 - 0.1));
        let model = FeModel::new(&system, &mesh, &[xa, xb]).unwrap();
        let fac = model.factor(&v).unwrap();
        let resp = |f: DVector<f64>, g: DVector<f64>| g.dot(&fac.solve(&f));
        let pairs = [
            (
                resp(model.force_vector(xb, 1.0).unwrap(), model.deflection_functional(xa).unwrap()),
                resp(model.force_vector(xa, 1.0).unwrap(), model.deflection_functional(xb).unwrap()),
            ),
            (
                resp(model.couple_vector(xb, 1.0).unwrap(), model.rotation_functional(xa).unwrap()),
                resp(model.couple_vector(xa, 1.0).unwrap(), model.rotation_functional(xb).unwrap()),
            ),
            (
                resp(model.force_vector(xb, 1.0).unwrap(), model.rotation_functional(xa).unwrap()),
                resp(model.couple_vector(xa, 1.0).unwrap(), model.deflection_functional(xb).unwrap()),
            ),
        ];
        for (x, y) in pairs {
            let scale = x.abs().max(y.abs());
            if scale > 0.0 {
                worst_recip = worst_recip.max((x - y).abs() / scale);
            }
        }
    }
    let pass = oracle_err <= 1e-10 && worst_recip <= 1e-10;
    finish(
        "AC3",
        pass,
        start,
        10.0,
        format!("FE vs closed form max rel {oracle_err:.2e}; Maxwell-Betti over 200 two-span spring systems max rel {worst_recip:.2e} (tol 1e-10)"),
    );
}

/// Central differences of `f` at `p` with per-component step `h_j`.
fn fd_jacobian(f: &dyn Fn(&DVector<f64>) -> DVector<f64>, p: &DVector<f64>, h: &dyn Fn(f64) -> f64) -> DMatrix<f64> {
    let m = f(p).len();
    let mut j = DMatrix::zeros(m, p.len());
    for c in 0..p.len() {
        let step = h(p[c]);
        let (mut up, mut dn) = (p.clone(), p.clone());
        up[c] += step;
        dn[c] -= step;
        j.set_column(c, &((f(&up) - f(&dn)) / (2.0 * step)));
    }
    j
}

#[test]
fn ac04_jacobians_match_finite_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC04);
    let train = AxleTrain::new(vec![0.0, -2.0], vec![2.4e4, 2.4e4], linspace(1.0, 35.0, 40)).unwrap();
    let mut worst = Vec::new();

    let ss = BeamSystem::simply_supported(20.0).unwrap();
    let mesh = Mesh::uniform(20.0, 12).unwrap();
    let stations = [4.0, 13.3];
    let single_train = AxleTrain::point_load(1e5, linspace(0.5, 19.5, 30)).unwrap();
    let v = DVector::from_fn(12, |_, _| 1.0 / 10f64.powf(rng.random_range(9.0..10.0)));
    let analytic: Arc<dyn ForwardModel> =
        Arc::new(AnalyticSpan::build(20.0, &stations, &single_train, &mesh).unwrap());
    let fe_ss: Arc<dyn ForwardModel> =
        Arc::new(FeForward::new(&ss, &mesh, &stations, &single_train, Arc::new(AdjointJacobian)).unwrap());

    let two = BeamSystem::new(vec![18.0, 18.0], vec![Support::spring(5e8), Support::PINNED, Support::spring(2e9)], None)
        .unwrap();
    let mesh2 = Mesh::uniform(36.0, 18).unwrap();
    let v2 = DVector::from_fn(18, |_, _| 1.0 / 10f64.powf(rng.random_range(9.5..10.5)));
    let fe_two: Arc<dyn ForwardModel> =
        Arc::new(FeForward::new(&two, &mesh2, &[14.0, 22.0], &train, Arc::new(AdjointJacobian)).unwrap());

    for (name, fwd, v) in [("analytic single span", &analytic, &v), ("FE single span", &fe_ss, &v), ("FE two span", &fe_two, &v2)] {
        let j = fwd.jacobian(v).unwrap();
        let fd = fd_jacobian(&|x| fwd.rotations(x).unwrap(), v, &|x| 1e-6 * x);
        worst.push((format!("{name} compliance"), max_rel(&j, &fd)));
        let eta = v.map(f64::ln);
        let (_, j_eta) = forward_in_params(fwd.as_ref(), ParamMap::Exp, &eta).unwrap();
        let fd_eta = fd_jacobian(&|e| fwd.rotations(&e.map(f64::exp)).unwrap(), &eta, &|_| 1e-5);
        worst.push((format!("{name} log-latent"), max_rel(&j_eta, &fd_eta)));
    }
    let pass = worst.iter().all(|(_, e)| *e <= 1e-5);
    let detail = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    finish("AC4", pass, start, 30.0, format!("max rel error vs central differences: {detail} (tol 1e-5)"));
}

fn min_eig_ratio(m: &DMatrix<f64>, scale: f64) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min() / scale
}

#[test]
fn ac05_fisher_structure() {
    let start = Instant::now();
    let system = BeamSystem::new(vec![15.0, 20.0], vec![Support::spring(1e9), Support::PINNED, Support::PINNED], None)
        .unwrap();
    let mesh = Mesh::uniform(35.0, 14).unwrap();
    let stations = [4.0, 12.0, 25.0];
    let train = AxleTrain::point_load(1e5, linspace(0.5, 34.5, 50)).unwrap();
    let fe = FeForward::new(&system, &mesh, &stations, &train, Arc::new(AdjointJacobian)).unwrap();
    let v0 = DVector::from_element(14, 1.0 / 8e9);
    let a = fe.jacobian(&v0).unwrap();
    let noise = NoiseModel::new(2.5e-11, Correlation::Ar1 { rho: 0.4, block: 50 }).unwrap();

    let total = fisher_information(&a, &noise).unwrap();
    let blocks = per_sensor_fisher(&a, &noise, 3).unwrap();
    let sum = blocks.iter().fold(DMatrix::zeros(14, 14), |acc, b| acc + b);
    let additivity = max_rel(&sum, &total);

    let y = fe.rotations(&v0).unwrap();
    let tau = 1e21;
    let prior = PriorSpec::new(Parameterization::LinearCompliance, 2, tau, v0.clone()).unwrap();
    let post = posterior_linear(&a, &y, &noise, &prior).unwrap();
    let d = difference_oracle(2, 14);
    let prior_q = d.transpose() * &d * tau;
    let linear_q = max_rel(&post.precision, &(&prior_q + &total));
    let scale = SymmetricEigen::new(post.precision.clone()).eigenvalues.max();
    let loewner = min_eig_ratio(&(&post.precision - &prior_q), scale).min(min_eig_ratio(&(&post.precision - &total), scale));

    // Laplace precision of the log-latent fit at its MAP
    let eta0 = v0.map(f64::ln);
    let fwd: Arc<dyn ForwardModel> = Arc::new(fe.clone());
    let problem = NonlinearProblem::new(
        fwd.clone(),
        Parameterization::LogLatent,
        y.clone(),
        &noise,
        2,
        eta0.clone(),
        GnControls::default(),
    )
    .unwrap();
    let gn = problem.solve(noise.sigma2(), 50.0, &[]).unwrap();
    let (_, j_eta) = forward_in_params(fwd.as_ref(), ParamMap::Exp, &gn.params).unwrap();
    let info_eta = fisher_information(&j_eta, &noise).unwrap();
    let laplace_q = max_rel(&gn.hessian, &(&d.transpose() * &d * 50.0 + &info_eta));

    let pass = additivity <= 1e-12 && linear_q <= 1e-12 && laplace_q <= 1e-10 && loewner >= -1e-10;
    finish(
        "AC5",
        pass,
        start,
        10.0,
        format!(
            "per-sensor additivity {additivity:.1e}; Q_post vs tau D'D + I {linear_q:.1e} (linear), {laplace_q:.1e} (log-latent Laplace); min Loewner eigenvalue ratio {loewner:.1e}"
        ),
    );
}

/// Index of the largest absolute second difference.
fn sharpest_point(c: &[f64]) -> usize {
    (1..c.len() - 1)
        .max_by(|&a, &b| {
            let da = (c[a + 1] - 2.0 * c[a] + c[a - 1]).abs();
            let db = (c[b + 1] - 2.0 * c[b] + c[b - 1]).abs();
            da.total_cmp(&db)
        })
        .unwrap()
}

#[test]
fn ac06_informativeness_geometry() {
    let start = Instant::now();
    let (l, n, k, ei0) = (20.0, 200, 200, 5e9);
    let sigma = 5e-6;
    let mesh = Mesh::uniform(l, n).unwrap();
    let train = AxleTrain::point_load(1e5, (0..k).map(|i| (i as f64 + 0.5) * l / k as f64).collect()).unwrap();
    let ei = vec![ei0; n];
    let left = informativeness_curve(l, 0.25 * l, &mesh, &train, &ei, sigma).unwrap();
    let right = informativeness_curve(l, 0.75 * l, &mesh, &train, &ei, sigma).unwrap();
    let x_mid = mesh.midpoints();
    let arg = (0..n).max_by(|&a, &b| left[a].total_cmp(&left[b])).unwrap();
    let arg_ratio = x_mid[arg] / l;
    let kink = sharpest_point(&left);
    let kink_ok = (x_mid[kink] - 0.25 * l).abs() <= mesh.element(0).1;
    let peak = left.iter().cloned().fold(0.0, f64::max);
    let mirror = (0..n).map(|j| (left[j] - right[n - 1 - j]).abs()).fold(0.0, f64::max) / peak;

    // span-1 stations moving away from the interior support of a 20 + 20 m beam
    let system = BeamSystem::continuous(vec![l, l]).unwrap();
    let mesh2 = Mesh::uniform(2.0 * l, 2 * n).unwrap();
    let train2 = AxleTrain::point_load(1e5, (0..k).map(|i| (i as f64 + 0.5) * 2.0 * l / k as f64).collect()).unwrap();
    let ei2 = vec![ei0; 2 * n];
    let v2 = DVector::from_element(2 * n, 1.0 / ei0);
    let distances: Vec<f64> = (1..20).map(|d| d as f64).collect();
    let span2: Vec<f64> = distances
        .iter()
        .map(|d| {
            let fe = FeForward::new(&system, &mesh2, &[l - d], &train2, Arc::new(AdjointJacobian)).unwrap();
            let curve = informativeness_from_rows(&fe.jacobian(&v2).unwrap(), &ei2, sigma).unwrap();
            curve[n..].iter().sum()
        })
        .collect();
    let monotone = span2.windows(2).all(|w| w[1] < w[0]);
    let trough = (0..span2.len()).min_by(|&a, &b| span2[a].total_cmp(&span2[b])).unwrap();

    let pass = kink_ok && (0.29..=0.37).contains(&arg_ratio) && mirror <= 1e-10 && monotone;
    finish(
        "AC6",
        pass,
        start,
        60.0,
        format!(
            "kink at x/L = {:.4} ({}), argmax x/L = {arg_ratio:.4} (want [0.29, 0.37]), mirror max rel {mirror:.1e}; \
             span-2 information monotone in distance from the interior support: {monotone} \
             (minimum at {} m of 1..19 m, ratio last/min {:.2})",
            x_mid[kink] / l,
            if kink_ok { "at sensor" } else { "off sensor" },
            distances[trough],
            span2[span2.len() - 1] / span2[trough],
        ),
    );
}

#[test]
fn ac07_noise_sweep() {
    let start = Instant::now();
    let cfg = NoiseStudyConfig::default();
    let study = noise_sweep_study(&cfg, 0xAC07).unwrap();
    let widths: Vec<f64> = study.levels.iter().map(|l| l.mean_band_width).collect();
    let decreasing = widths.windows(2).all(|w| w[1] < w[0]);
    let detection_ok = study.levels.iter().filter(|l| l.sigma_mm_per_m <= 0.005).all(|l| l.detected);
    let n = study.x_left.len();
    let widest_at_ends = study.levels.iter().all(|l| {
        let w = &l.element_width;
        let max = w.iter().cloned().fold(0.0, f64::max);
        w[0] == max || w[n - 1] == max
    });
    let pass = decreasing && detection_ok && widest_at_ends;
    let levels = study
        .levels
        .iter()
        .map(|l| format!("σ={} width={:.3e} detect={:.2}", l.sigma_mm_per_m, l.mean_band_width, l.detection_rate))
        .collect::<Vec<_>>()
        .join("; ");
    finish(
        "AC7",
        pass,
        start,
        120.0,
        format!(
            "{} seeds/level: {levels}; widths decreasing {decreasing}, detected at σ ≤ 0.005 {detection_ok}, widest at end elements {widest_at_ends}",
            cfg.replicates
        ),
    );
}

#[test]
fn ac08_bias_variance_sweep() {
    let start = Instant::now();
    let cfg = BiasVarianceConfig::default();
    let records = bias_variance_sweep(&cfg, 0xAC08).unwrap();
    let curve = |r: usize| -> Vec<f64> {
        cfg.mesh_sizes
            .iter()
            .map(|n| records.iter().find(|s| s.n_sensors == r && s.n_elements == *n).unwrap().rmse)
            .collect()
    };
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for &r in &cfg.sensor_counts {
        let c = curve(r);
        let (imin, min) = c.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
        let (e0, e1) = (c[0] / min, c[c.len() - 1] / min);
        if imin == 0 || imin == c.len() - 1 || e0 < 1.2 || e1 < 1.2 {
            problems.push(format!("R={r}: no interior minimum"));
        }
        summary.push(format!("R={r} min at N={} ends {e0:.2}x/{e1:.2}x", cfg.mesh_sizes[imin]));
    }
    for (i, n) in cfg.mesh_sizes.iter().enumerate() {
        let by_r: Vec<f64> = cfg.sensor_counts.iter().map(|&r| curve(r)[i]).collect();
        if !by_r.windows(2).all(|w| w[1] < w[0]) {
            problems.push(format!("N={n}: RMSE not decreasing in R {by_r:?}"));
        }
    }
    let worst_gap = records.iter().map(|s| s.decomposition_gap()).fold(0.0, f64::max);
    if worst_gap > 3.0 {
        problems.push(format!("decomposition gap {worst_gap:.2} s.e."));
    }
    let pass = problems.is_empty() && cfg.replicates >= 50;
    finish(
        "AC8",
        pass,
        start,
        600.0,
        format!(
            "{} seeds: {}; max |RMSE²-bias²-var| = {worst_gap:.2} s.e.{}",
            cfg.replicates,
            summary.join(", "),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    );
}

#[test]
fn ac09_coverage_calibration() {
    let start = Instant::now();
    let (l, n, reps) = (20.0, 20, 200);
    let mesh = Mesh::uniform(l, n).unwrap();
    let train = AxleTrain::point_load(1e5, linspace(0.5, 19.5, 40)).unwrap();
    let a = AnalyticSpan::build(l, &[5.0, 15.0], &train, &mesh).unwrap().design().matrix.clone();
    let v0: f64 = 1.0 / 5e9;
    let center = DVector::from_element(n, v0);
    let tau = 1.0 / (1e-3 * v0).powi(2);
    let sigma = 5e-6;
    let noise = NoiseModel::white(sigma).unwrap();
    let prior = PriorSpec::new(Parameterization::LinearCompliance, 2, tau, center.clone()).unwrap();
    let d = difference_operator(2, n).unwrap().matrix;
    // v = center + Dᵀ(DDᵀ)⁻¹ w / √τ draws the range-space part from the prior
    let lift = d.transpose() * (&d * d.transpose()).try_inverse().unwrap() / tau.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC09);
    let mut hits = vec![0usize; n];
    for _ in 0..reps {
        let w = DVector::from_fn(n - 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let truth = &center + &lift * w;
        let eps = DVector::from_fn(a.nrows(), |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
        let y = &a * &truth + eps;
        let post = posterior_linear(&a, &y, &noise, &prior).unwrap();
        let sd = post.marginal_sd();
        for j in 0..n {
            if (truth[j] - post.mean[j]).abs() <= 1.959963984540054 * sd[j] {
                hits[j] += 1;
            }
        }
    }
    let freq: Vec<f64> = hits.iter().map(|h| *h as f64 / reps as f64).collect();
    let min = freq.iter().cloned().fold(1.0, f64::min);
    let overall = hits.iter().sum::<usize>() as f64 / (reps * n) as f64;
    finish(
        "AC9",
        min >= 0.90,
        start,
        300.0,
        format!("{reps} replications, 95% bands: overall coverage {overall:.3}, worst element {min:.3} (want ≥ 0.90)"),
    );
}

const TWIN: &str = r#"
seed = 2024

[system]
spans = [18.0, 18.0]
supports = ["spring", "pinned", "spring"]
springs = "estimate"

[mesh]
per_span = [MESH, MESH]

[sensors]
stations = [{ id = "T1", position = 14.0 }, { id = "T2", position = 22.0 }]

[loads]
offsets = [0.0, -2.0]
mass_t = 4.9
sweep = { start = 5.0, end = 30.0, count = 126 }

[noise]
sigma_mm_per_m = 0.002
known = false

[prior]
parameterization = "log-latent"
order = 1

[hyper]
policy = "evidence"

[truth]
base_ei = 1e10
zones = [{ start = 0.0, end = 18.0, factor = 0.6 }]
springs = [5e8, 5e8]

INGEST
"#;

const TWIN_GROUPS: &str = r#"
[ingest]
groups = [{ sensor = "T1", channels = ["T1a", "T1b"] }, { sensor = "T2", channels = ["T2a", "T2b"] }]
"#;

/// Raw 5 Hz traces of two channels per station for several crossings; the
/// last crossing is a mis-trigger with shuffled samples. Returns the
/// `[ingest]` section that lists them.
fn write_twin_traces(dir: &Path) -> String {
    let cfg = parse_config(&TWIN.replace("MESH", "3").replace("INGEST", ""), "twin").unwrap();
    let t = cfg.truth.clone().unwrap();
    let system = cfg.build_system_with(t.springs.as_deref()).unwrap();
    let truth = make_truth(t.base_ei, &t.zones, &Mesh::uniform(36.0, 36).unwrap()).unwrap();
    let base_train = cfg.build_train().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC10);
    let mut entries = TWIN_GROUPS.to_string();
    let speeds = [1.2, 1.5, 1.8, 1.4];
    for (c, speed) in speeds.iter().enumerate() {
        let start = -12.0;
        let times: Vec<f64> = (0..).map(|i| i as f64 / 5.0).take_while(|t| start + speed * t <= 42.0).collect();
        let x: Vec<f64> = times.iter().map(|t| start + speed * t).collect();
        let train = AxleTrain::new(base_train.offsets.clone(), base_train.loads.clone(), x).unwrap();
        let clean = exact_rotations(&system, &truth, &[14.0, 22.0], &train).unwrap();
        let k = times.len();
        let mut traces = Vec::new();
        for (s, name) in ["T1", "T2"].iter().enumerate() {
            for ch in ["a", "b"] {
                let drift = rng.random_range(-0.05..0.05);
                let mut tilt: Vec<f64> = (0..k)
                    .map(|i| clean[s * k + i] * 1e3 + drift + 0.005 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                if c == speeds.len() - 1 {
                    for i in (1..k).rev() {
                        tilt.swap(i, rng.random_range(0..=i));
                    }
                }
                traces.push(TiltTrace::new(format!("{name}{ch}"), times.clone(), tilt).unwrap());
            }
        }
        let file = dir.join(format!("crossing{c}.csv"));
        write_trace_csv(&file, &traces).unwrap();
        entries.push_str(&format!(
            "\n[[ingest.crossings]]\nfile = \"crossing{c}.csv\"\nspeed = {speed}\nstart_offset = {start}\n"
        ));
    }
    entries
}

fn twin_config(dir: &Path, ingest: &str, mesh: usize) -> tiltei_core::io::RunConfig {
    let path = dir.join(format!("twin{mesh}.toml"));
    std::fs::write(&path, TWIN.replace("MESH", &mesh.to_string()).replace("INGEST", ingest)).unwrap();
    load_config(&path).unwrap()
}

fn rel_width(b: &ResultBundle, j: usize) -> f64 {
    (b.band.hi_outer[j] - b.band.lo_outer[j]) / b.band.mean[j]
}

#[test]
fn ac10_field_workflow_twin() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let crossings = write_twin_traces(dir.path());
    let coarse_cfg = twin_config(dir.path(), &crossings, 3);
    let fine_cfg = twin_config(dir.path(), &crossings, 18);
    let data = ingest_tilt_csv(&coarse_cfg).unwrap();
    let coarse = run_inversion(&coarse_cfg, &data).unwrap();
    let fine = run_inversion(&fine_cfg, &data).unwrap();

    // span interiors are the elements touching no support
    let separated = coarse.band.hi_outer[1] < coarse.band.lo_outer[4];
    let (s1, s2) = (coarse.mean_ei_between(0.0, 18.0).unwrap(), coarse.mean_ei_between(18.0, 36.0).unwrap());

    // interior zero-moment point: least informed fine element between the stations
    let x_mid = &fine.fisher.x_mid;
    let info: Vec<f64> = (0..x_mid.len()).map(|j| fine.fisher.curves.iter().map(|c| c[j]).sum()).collect();
    let j0 = (0..x_mid.len())
        .filter(|&j| x_mid[j] > 14.0 && x_mid[j] < 22.0)
        .min_by(|&a, &b| info[a].total_cmp(&info[b]))
        .unwrap();
    let c0 = (0..coarse.x_left.len()).find(|&c| coarse.x_left[c] <= x_mid[j0] && x_mid[j0] < coarse.x_right[c]).unwrap();
    let (w_fine, w_coarse) = (rel_width(&fine, j0), rel_width(&coarse, c0));
    let widened = w_fine > w_coarse;

    let pass = data.rejected == vec![3] && separated && s1 < s2 && widened;
    finish(
        "AC10",
        pass,
        start,
        180.0,
        format!(
            "crossings kept {:?} rejected {:?}; springs {:.2e}/{:.2e}; span means {s1:.3e} < {s2:.3e}, 95% bands of interior elements \
             [{:.3e}, {:.3e}] vs [{:.3e}, {:.3e}] separated {separated}; zero-moment element at {:.1} m: relative 95% width \
             {w_fine:.3} (36 el.) vs {w_coarse:.3} (6 el.)",
            data.kept,
            data.rejected,
            coarse.springs[0],
            coarse.springs[1],
            coarse.band.lo_outer[1],
            coarse.band.hi_outer[1],
            coarse.band.lo_outer[4],
            coarse.band.hi_outer[4],
            x_mid[j0],
        ),
    );
}

fn end_to_end_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let cfg = parse_config(&TWIN.replace("MESH", "6").replace("INGEST", ""), "twin").unwrap();
    let (data, _) = simulate_from_config(&cfg).unwrap();
    let bundle = run_inversion(&cfg, &data).unwrap();
    let paths = export_results(&bundle, dir).unwrap();
    let noise = NoiseStudyConfig { replicates: 4, ..Default::default() };
    let study = noise_sweep_study(&noise, 5).unwrap();
    let bv = BiasVarianceConfig {
        replicates: 8,
        mesh_sizes: vec![8, 12, 16],
        lambda: tiltei_core::diagnostics::SweepLambda::QuasiOptimality {
            reference_n: 12,
            lo: 1e-10,
            hi: 1e2,
            points: 31,
            calibration: 4,
        },
        reference_elements: 400,
        ..Default::default()
    };
    let records = bias_variance_sweep(&bv, 5).unwrap();
    let mut out: Vec<(String, Vec<u8>)> = [&paths.ei_profile, &paths.fit, &paths.fisher_curves, &paths.report]
        .iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
        .collect();
    out.push(("noise_study".into(), serde_json::to_vec(&study).unwrap()));
    out.push(("bv_sweep".into(), serde_json::to_vec(&records).unwrap()));
    out
}

#[test]
fn ac11_determinism_across_worker_counts() {
    let start = Instant::now();
    let runs: Vec<Vec<(String, Vec<u8>)>> = [1usize, 4, 4]
        .iter()
        .map(|&threads| {
            let dir = tempfile::tempdir().unwrap();
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| end_to_end_bytes(dir.path()))
        })
        .collect();
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    let names = runs[0].iter().map(|(n, b)| format!("{n} ({} B)", b.len())).collect::<Vec<_>>().join(", ");
    finish(
        "AC11",
        identical,
        start,
        60.0,
        format!("1, 4 and 4 worker threads give byte-identical outputs: {identical} [{names}]"),
    );
}

#[test]
fn difference_oracle_matches_library() {
    for order in 0..=2 {
        let lib = difference_operator(order, 9).unwrap().matrix;
        assert_eq!(lib, difference_oracle(order, 9));
    }
}
