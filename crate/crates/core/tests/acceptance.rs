//! Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::process::ExitCode;
use std::time::Instant;

use anisowave::analysis::{besov_tau_seminorm, gk_seq_norm, sobolev_seq_norm, DEFAULT_SEED};
use anisowave::assembly::{assemble_full, build_window, build_window_patches, BasisWindow, DenseMatrix, Domain, PatternBuilder};
use anisowave::basis1d::{build_family, Member1D};
use anisowave::compression::CompressionParams;
use anisowave::experiments::{
    audit_samples, basis_check, decay_rows, decay_slopes, default_sstar_table, distance_samples, quadrature_check,
    row_ratio, summarize_audit, DecayRow, DecaySlopes, Oracle,
};
use anisowave::index_geometry::MultiIndex;
use anisowave::manifold::{PatchGeometry, Preset};
use anisowave::quadrature::QuadratureSpec;
use anisowave::Kernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const Q: f64 = -0.5;

struct Outcome {
    pass: bool,
    detail: String,
    info: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail, info: Vec::new() }
    }
}

fn window(d: usize, j: u32, patches: usize) -> BasisWindow {
    let fam = build_family(d, j).expect("family");
    build_window_patches(&fam, j, patches).expect("window")
}

fn dense(w: &BasisWindow, domain: Domain<'_>) -> DenseMatrix {
    assemble_full(w, domain, Kernel::SingleLayer, Q, &QuadratureSpec::default()).expect("dense assembly")
}

fn floor_of(m: &DenseMatrix) -> f64 {
    1e-13 * m.data.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

fn sstar() -> Outcome {
    let got: Vec<Option<u32>> = default_sstar_table().iter().map(|r| r.min_d_tilde).collect();
    let want = [Some(4), Some(6), Some(3), Some(5), None, Some(4)];
    let show = |v: &[Option<u32>]| v.iter().map(|x| x.map_or("-".into(), |d| d.to_string())).collect::<Vec<_>>().join(",");
    Outcome::new(got == want, format!("table [{}] expected [{}]", show(&got), show(&want)))
}

fn basis() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for d in 1..=4 {
        let fam = build_family(d, 8).expect("family");
        let rows = basis_check(&fam, 8);
        let g = rows.iter().map(|r| r.gram_err).fold(0.0, f64::max);
        let m = rows.iter().map(|r| r.moment_err).fold(0.0, f64::max);
        worst = worst.max(g).max(m);
        parts.push(format!("d={d} gram {g:.1e} moment {m:.1e}"));
    }
    Outcome::new(worst <= 1e-12, format!("{} (tol 1e-12)", parts.join("; ")))
}

fn audit_line(w: &BasisWindow, m: &DenseMatrix, dt: f64, seed: u64) -> (bool, String) {
    let floor = floor_of(m);
    let mut ok = true;
    let mut parts = Vec::new();
    for o in Oracle::ALL {
        let s = summarize_audit(o, &audit_samples(w, m, o, dt, Q, 500, floor, seed));
        ok &= s.passes(500);
        parts.push(format!("{} n={} max/med {:.1} rho {:.2}", o.as_str(), s.samples, s.max_over_median, s.spearman));
    }
    (ok, parts.join("; "))
}

fn bounds() -> Outcome {
    let w = window(1, 4, 1);
    let m = dense(&w, Domain::UnitSquare);
    let (ok, detail) = audit_line(&w, &m, 1.0, DEFAULT_SEED);
    let mut out = Outcome::new(ok, format!("haar J=4: {detail}"));
    let sweep: Vec<u64> = (0..6).collect();
    let passed = sweep.iter().filter(|&&s| audit_line(&w, &m, 1.0, s).0).count();
    out.info.push(format!("haar J=4 seeds 0..5: {passed}/{} pass", sweep.len()));
    let w5 = window(1, 5, 1);
    let m5 = dense(&w5, Domain::UnitSquare);
    out.info.push(format!("haar J=5: {}", audit_line(&w5, &m5, 1.0, DEFAULT_SEED).1));
    drop(m5);
    let w2 = window(2, 4, 1);
    let m2 = dense(&w2, Domain::UnitSquare);
    out.info.push(format!("order 2 J=4: {}", audit_line(&w2, &m2, 2.0, DEFAULT_SEED).1));
    out
}

struct DecayRun {
    d: usize,
    rows: Vec<DecayRow>,
    slopes: DecaySlopes,
    n: usize,
    params: CompressionParams,
}

fn decay_run(d: usize, j: u32, rs: &[u32], domain_patches: Option<Preset>) -> DecayRun {
    let geometry = domain_patches.map(PatchGeometry::preset);
    let patches = geometry.as_ref().map_or(1, |g| g.patch_count());
    let w = window(d, j, patches);
    let domain = geometry.as_ref().map_or(Domain::UnitSquare, Domain::Surface);
    let m = dense(&w, domain);
    let params = CompressionParams::new(d as u32, Q, 0);
    let rows = decay_rows(&w, domain, &m, params, rs, DEFAULT_SEED).expect("decay rows");
    let slopes = decay_slopes(&rows).expect("slopes");
    DecayRun { d, rows, slopes, n: w.dim(), params }
}

fn err_target(p: &CompressionParams) -> f64 {
    let (s_bar, _) = p.rate_params();
    0.8 * (p.alpha * s_bar).min(0.5 * p.d_tilde as f64 + p.q)
}

fn decay(runs: &[DecayRun]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for run in runs {
        let t = err_target(&run.params);
        ok &= run.slopes.err >= t;
        let conv = run.rows.iter().filter(|r| r.norm_converged).count();
        parts.push(format!("d={} slope {:.3} target {:.3} ({conv}/{} norms settled in 20 its)", run.d, run.slopes.err, t, run.rows.len()));
    }
    Outcome::new(ok, parts.join("; "))
}

fn complexity(runs: &[DecayRun]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for run in runs {
        let first = run.rows.first().expect("rows");
        let last = run.rows.last().expect("rows");
        let (r0, r1) = (row_ratio(first), row_ratio(last));
        let fill = last.nnz_total as f64 / (run.n as f64).powi(2);
        ok &= r1 <= 2.0 * r0 && fill < 0.25;
        parts.push(format!(
            "d={} row ratio r={} {:.2} vs r={} {:.2}, fill {:.2}%",
            run.d,
            last.r,
            r1,
            first.r,
            r0,
            100.0 * fill
        ));
    }
    Outcome::new(ok, parts.join("; "))
}

fn schur(runs: &[DecayRun]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for run in runs {
        let t = 0.8 * 0.5 * (run.params.d_tilde as f64 + run.params.q);
        ok &= run.slopes.tail >= t;
        parts.push(format!("d={} tail slope {:.3} target {:.3}", run.d, run.slopes.tail, t));
    }
    Outcome::new(ok, parts.join("; "))
}

fn quadrature() -> Outcome {
    let spec = QuadratureSpec::default();
    let w = window(1, 4, 1);
    let c = quadrature_check(&w, Kernel::SingleLayer, Q, &spec, 100, 20, 1e-5, DEFAULT_SEED).expect("quadrature");
    let ok = c.far_samples == 100
        && c.far_worst_rel <= 1e-5
        && c.far_zero_worst_abs <= c.zero_floor
        && c.near_samples == 20
        && c.near_worst_rel <= 1e-3;
    let mut out = Outcome::new(
        ok,
        format!(
            "haar J=4: far n={} worst rel {:.2e} (tol 1e-5, {} structural zeros within {:.1e}); near n={} worst rel {:.2e} (tol 1e-3, {} below {:.1e} skipped)",
            c.far_samples, c.far_worst_rel, c.far_zero, c.zero_floor, c.near_samples, c.near_worst_rel, c.near_zero, c.near_floor
        ),
    );
    let w2 = window(2, 4, 1);
    let c2 = quadrature_check(&w2, Kernel::SingleLayer, Q, &spec, 100, 20, 1e-5, DEFAULT_SEED).expect("quadrature");
    out.info.push(format!(
        "order 2 J=4: far worst rel {:.2e} with {}/{} above 1e-5; near worst rel {:.2e}",
        c2.far_worst_rel, c2.far_over_tol, c2.far_samples, c2.near_worst_rel
    ));
    out
}

fn manifold() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();

    let fam = build_family(1, 3).expect("family");
    let w = build_window(&fam, 3).expect("window");
    let flat = PatchGeometry::preset(Preset::UnitSquare);
    let a = dense(&w, Domain::UnitSquare);
    let b = dense(&w, Domain::Surface(&flat));
    let bits = |m: &DenseMatrix| m.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let p = CompressionParams::new(1, Q, 3);
    let pa = PatternBuilder::new(&w, Domain::UnitSquare, p).build();
    let pb = PatternBuilder::new(&w, Domain::Surface(&flat), p).build();
    let same = bits(&a) == bits(&b) && pa == pb;
    ok &= same;
    parts.push(format!("single flat patch bit-identical: {same}"));

    for preset in [Preset::TwoPatchScreen, Preset::LCorner, Preset::CylinderPair] {
        let g = PatchGeometry::preset(preset);
        let w = window(1, 4, g.patch_count());
        let s = distance_samples(&g, &w, 200, DEFAULT_SEED);
        let l = g.lipschitz;
        let lo = s.iter().map(|x| x.ratio).fold(f64::INFINITY, f64::min);
        let hi = s.iter().map(|x| x.ratio).fold(0.0, f64::max);
        let inside = s.len() == 200 && lo >= 1.0 / l && hi <= l;
        ok &= inside;
        parts.push(format!("{preset}: ratios [{lo:.4}, {hi:.4}] band [{:.4}, {l:.4}]", 1.0 / l));
    }

    let rs = [2, 3, 4, 5];
    let flat_run = decay_run(2, 4, &rs, None);
    let screen = decay_run(2, 4, &rs, Some(Preset::TwoPatchScreen));
    let need = 0.7 * flat_run.slopes.err;
    ok &= screen.slopes.err >= need;
    parts.push(format!("screen slope {:.3} vs 0.7 x flat {:.3} = {need:.3}", screen.slopes.err, flat_run.slopes.err));
    Outcome::new(ok, parts.join("; "))
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE)
}

fn sequence_norms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..20 {
        let len = rng.gen_range(1..40);
        let coeffs: Vec<(MultiIndex, f64)> = (0..len)
            .map(|_| {
                let (jx, jy) = (rng.gen_range(0..9u32), rng.gen_range(0..9u32));
                let mx = Member1D::wavelet(jx, rng.gen_range(0..1u32 << jx), 0);
                let my = Member1D::wavelet(jy, rng.gen_range(0..1u32 << jy), 0);
                (MultiIndex::new(0, mx, my), rng.gen_range(-2.0..2.0))
            })
            .collect();
        let s = rng.gen_range(0.1..1.5);
        let q = rng.gen_range(-0.5..0.5);
        let sd = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let (mut hs, mut hg, mut hb) = (0.0, 0.0, 0.0);
        let tau = 1.0 / (s + 0.5);
        for (m, c) in &coeffs {
            let (jx, jy) = (m.jx() as f64, m.jy() as f64);
            let linf = jx.max(jy);
            hs += 2f64.powf(2.0 * s * linf) * c * c;
            hg += 2f64.powf(2.0 * q * linf) * 2f64.powf(2.0 * sd[0] * jx) * 2f64.powf(2.0 * sd[1] * jy) * c * c;
            hb += 2f64.powf(tau * q * linf) * c.abs().powf(tau);
        }
        let pairs = [
            (sobolev_seq_norm(&coeffs, s), hs.sqrt()),
            (gk_seq_norm(&coeffs, q, sd), hg.sqrt()),
            (besov_tau_seminorm(&coeffs, q, s).expect("positive s"), hb.powf(1.0 / tau)),
        ];
        for (got, want) in pairs {
            ok &= rel_close(got, want);
            worst = worst.max((got - want).abs() / want.abs());
        }
    }
    Outcome::new(ok, format!("20 sets, worst rel {worst:.1e} (tol 1e-12)"))
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |n: u32, limit_s: f64, t: Instant, o: Outcome| {
        let secs = t.elapsed().as_secs_f64();
        let pass = o.pass && secs < limit_s;
        all &= pass;
        println!(
            "criterion {n}: {} {} [{secs:.1}s, limit {limit_s}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
        for i in o.info {
            println!("  info: {i}");
        }
    };

    let t = Instant::now();
    report(1, 1.0, t, sstar());
    let t = Instant::now();
    report(2, 30.0, t, basis());
    let t = Instant::now();
    report(3, 600.0, t, bounds());

    let t = Instant::now();
    let rs = [2, 3, 4, 5, 6];
    let runs = vec![decay_run(1, 5, &rs, None), decay_run(2, 5, &rs, None)];
    report(4, 1800.0, t, decay(&runs));
    report(5, 1800.0, t, complexity(&runs));
    report(6, 600.0, t, schur(&runs));
    drop(runs);

    let t = Instant::now();
    report(7, 300.0, t, quadrature());
    let t = Instant::now();
    report(8, 900.0, t, manifold());
    let t = Instant::now();
    report(9, 1.0, t, sequence_norms());

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
