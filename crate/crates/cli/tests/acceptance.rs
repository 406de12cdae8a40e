//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::VecDeque;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use localte::density::CpdModel;
use localte::localmodel::LocalModel;
use localte::oracle::{te_binned, BinningConfig, RangePolicy};
use localte::series::{Dataset, TimeSeries};
use localte::systems::{
    add_measurement_noise, integrate_rk4, iterate_coupled, ChuaParams, CouplingParams,
    CHUA_TRANSIENT, DEFAULT_SEEDS, MAP_TRANSIENT,
};
use localte::transfer::{
    te_matrix, transfer_entropy_series, EmbedConfig, FlowResult, TeConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: localte::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- oracles

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(&f, a, b, fa, fm, fb, whole, tol, 50)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

// ---------------------------------------------------------------- shared data

fn chua(n: usize) -> Result<Dataset, String> {
    lib(integrate_rk4(&ChuaParams::default(), [0.1, 0.0, 0.0], n, CHUA_TRANSIENT))
}

fn flow_d3(ds: &Dataset) -> Result<FlowResult, String> {
    let embed = EmbedConfig { dim: 3, ..EmbedConfig::default() };
    lib(te_matrix(ds, &embed, &TeConfig::default()))
}

fn chua_pattern(f: &FlowResult) -> Result<(), String> {
    let t = &f.net_flow;
    ensure(
        t[1] > 0.0 && t[0] < 0.0 && t[2] < 0.0 && t[1] > t[0] && t[0] > t[2],
        || format!("T = {t:?} breaks T2 > 0 > T1 > T3"),
    )
}

fn coupled(eps: f64, mu: f64, n: usize) -> Result<Dataset, String> {
    let p = lib(CouplingParams::new(eps, mu, 0.5))?;
    lib(iterate_coupled(p, DEFAULT_SEEDS.0, DEFAULT_SEEDS.1, n, MAP_TRANSIENT))
}

fn bin() -> &'static Path {
    Path::new(env!("CARGO_BIN_EXE_localte"))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin())
        .args(args)
        .env_remove("RUST_BACKTRACE")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("localte {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

// ---------------------------------------------------------------- criteria

fn density() -> Check {
    let mut worst_mass = 0.0f64;
    let mut worst_fd = 0.0f64;
    for &r in &[0.1, 1.0, 10.0, 1000.0] {
        let center = 0.37;
        let m = lib(CpdModel::new(center, r))?;
        let half = 60.0 / r;
        let mass = integrate(|y| m.cpd(y), center - half, center + half, 1e-12);
        // tails beyond ±60/r carry 2/(1+e^60)
        worst_mass = worst_mass.max((mass - 1.0).abs());

        let h = 1e-4 / r;
        for i in -200..=200 {
            let y = center + i as f64 * 0.1 / r;
            let fd = -(m.ccdf(y + h) - m.ccdf(y - h)) / (2.0 * h);
            // relative to the peak density r/4
            worst_fd = worst_fd.max((fd - m.cpd(y)).abs() / (r / 4.0));
        }
    }
    ensure(worst_mass <= 1e-6, || format!("mass error {worst_mass:e}"))?;
    ensure(worst_fd <= 1e-6, || format!("finite-difference error {worst_fd:e}"))?;

    let mut checked = 0;
    for &r in &[1e4, 1e5, 1e6, 1e8] {
        let m = lib(CpdModel::new(0.0, r))?;
        for &off in &[1e-2, 2e-2, 0.1, 1.0, 10.0] {
            for y in [-off, off] {
                let step = if y < 0.0 { 1.0 } else { 0.0 };
                let gap = (m.ccdf(y) - step).abs();
                let bound = (-r * off).exp();
                ensure(gap <= bound, || format!("r={r}, y={y}: |ccdf - step| = {gap:e} > {bound:e}"))?;
                checked += 1;
            }
        }
    }
    let m = lib(CpdModel::new(0.0, 1000.0))?;
    ensure((1.0 - m.ccdf(-0.1)).abs() <= (-100f64).exp(), || "r=1000 step limit".into())?;
    Ok(format!(
        "max |mass-1| = {worst_mass:.1e}, max fd rel err = {worst_fd:.1e}, {checked} step-limit points"
    ))
}

fn duplicate_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let configs = [
        (EmbedConfig::default(), TeConfig::default()),
        (
            EmbedConfig { dim: 2, tau: 2, standardize: true },
            TeConfig { model: LocalModel::zero_order(4, 3), ..TeConfig::default() },
        ),
        (
            EmbedConfig { dim: 2, ..EmbedConfig::default() },
            TeConfig { model: LocalModel::first_order(Some(8), 0), ..TeConfig::default() },
        ),
    ];
    for case in 0..20 {
        let n = rng.random_range(50..400);
        let values: Vec<f64> = match case % 3 {
            0 => (0..n).map(|_| rng.random::<f64>()).collect(),
            1 => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
            _ => {
                let mut x: f64 = 0.0;
                (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        x = 0.8 * x + z;
                        x * 1e3
                    })
                    .collect()
            }
        };
        let s = lib(TimeSeries::new("s", values))?;
        let (embed, cfg) = configs[case % configs.len()];
        let cfg = TeConfig { keep_per_sample: true, ..cfg };
        let e = lib(transfer_entropy_series(&s, &s, &embed, &cfg))?;
        ensure(e.value_bits == 0.0, || format!("series {case}: TE(s,s) = {:e}", e.value_bits))?;
        let logs = e.per_sample_logs.unwrap_or_default();
        ensure(logs.len() == e.n_samples && logs.iter().all(|&l| l == 0.0), || {
            format!("series {case}: nonzero per-sample log-ratio")
        })?;
    }
    Ok("20 series, all per-sample log-ratios exactly 0".into())
}

fn antisymmetry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..12);
        let scale = 10f64.powi(rng.random_range(-3..4));
        let m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 0.0 } else { scale * rng.random_range(-5.0..5.0) })
                    .collect()
            })
            .collect();
        let labels = (0..n).map(|i| format!("c{i}")).collect();
        let f = lib(FlowResult::from_matrix(labels, m))?;
        worst = worst.max(f.net_flow_sum().abs());
    }
    let mut runs = vec![flow_d3(&chua(512)?)?];
    runs.push(lib(te_matrix(&coupled(0.1, 0.3, 400)?, &EmbedConfig::default(), &TeConfig::default()))?);
    let noise: Vec<TimeSeries> = (0..4)
        .map(|c| TimeSeries::new(format!("n{c}"), (0..300).map(|_| rng.random::<f64>()).collect()))
        .collect::<localte::Result<_>>()
        .map_err(|e| e.to_string())?;
    let noise = lib(Dataset::new(noise))?;
    runs.push(lib(te_matrix(
        &noise,
        &EmbedConfig { dim: 2, ..EmbedConfig::default() },
        &TeConfig { model: LocalModel::first_order(None, 2), ..TeConfig::default() },
    ))?);
    for f in &runs {
        worst = worst.max(f.net_flow_sum().abs());
    }
    ensure(worst <= 1e-9, || format!("|sum T| = {worst:e}"))?;
    Ok(format!("200 random matrices + {} estimator runs, max |sum T| = {worst:.1e}", runs.len()))
}

struct Cell {
    eps: f64,
    mu: f64,
    sync_err: f64,
    i_xy: f64,
    i_yx: f64,
}

fn read_sweep(path: &Path) -> Result<Vec<Cell>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    ensure(lines.next() == Some("eps,mu,sync_err,i_xy,i_yx"), || "sweep header".into())?;
    lines
        .map(|l| {
            let v: Vec<f64> = l
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| format!("{c:?}: {e}")))
                .collect::<Result<_, _>>()?;
            Ok(Cell { eps: v[0], mu: v[1], sync_err: v[2], i_xy: v[3], i_yx: v[4] })
        })
        .collect()
}

fn figure2(dir: &Path) -> Check {
    let out = dir.join("fig2.csv");
    cli(&["sweep", "--n", "500", "--a", "0.5", "--out", out.to_str().unwrap()])?;
    let cells = read_sweep(&out)?;
    ensure(cells.len() == 121, || format!("{} cells", cells.len()))?;
    let at = |i: usize, j: usize| &cells[i * 11 + j];
    let synced = |c: &Cell| c.sync_err < 1e-6;

    // (a) one 4-connected region that contains symmetric cells
    let members: Vec<(usize, usize)> =
        (0..11).flat_map(|i| (0..11).map(move |j| (i, j))).filter(|&(i, j)| synced(at(i, j))).collect();
    ensure(!members.is_empty(), || "no synchronised cells".into())?;
    let mut seen = vec![false; 121];
    let mut queue = VecDeque::from([members[0]]);
    seen[members[0].0 * 11 + members[0].1] = true;
    let mut reached = 0;
    while let Some((i, j)) = queue.pop_front() {
        reached += 1;
        let nbrs = [(i.wrapping_sub(1), j), (i + 1, j), (i, j.wrapping_sub(1)), (i, j + 1)];
        for (a, b) in nbrs {
            if a < 11 && b < 11 && !seen[a * 11 + b] && synced(at(a, b)) {
                seen[a * 11 + b] = true;
                queue.push_back((a, b));
            }
        }
    }
    let diagonal: Vec<f64> = members.iter().filter(|&&(i, j)| i == j).map(|&(i, _)| at(i, i).eps).collect();
    let part_a = reached == members.len() && !diagonal.is_empty();

    // (b) flat over the synchronised cells
    let mut flat = Vec::new();
    for (name, get) in [("I_xy", (|c: &Cell| c.i_xy) as fn(&Cell) -> f64), ("I_yx", |c: &Cell| c.i_yx)] {
        let all = cells.iter().map(get);
        let range = all.clone().fold(f64::NEG_INFINITY, f64::max) - all.fold(f64::INFINITY, f64::min);
        let zone = cells.iter().filter(|c| synced(c)).map(get);
        let spread = zone.clone().fold(f64::NEG_INFINITY, f64::max) - zone.fold(f64::INFINITY, f64::min);
        flat.push((name, spread, range));
    }
    let part_b = flat.iter().all(|&(_, s, r)| s <= 0.1 * r);

    // (c) eps = 0 row
    let row: Vec<&Cell> = (0..11).map(|j| at(0, j)).filter(|c| c.eps == 0.0 && (0.2..=0.6).contains(&c.mu)).collect();
    let bad: Vec<String> = row
        .iter()
        .filter(|c| !(c.i_xy > c.i_yx))
        .map(|c| format!("mu={}: I_xy={} I_yx={} sync_err={:e}", c.mu, c.i_xy, c.i_yx, c.sync_err))
        .collect();
    let part_c = row.len() == 5 && bad.is_empty();

    let detail = format!(
        "(a) {} synced cells, connected={}, diagonal eps={:?}; (b) {}; (c) {}",
        members.len(),
        reached == members.len(),
        diagonal,
        flat.iter()
            .map(|(n, s, r)| format!("{n} spread {s:.3} of range {r:.3}"))
            .collect::<Vec<_>>()
            .join(", "),
        if bad.is_empty() { "I_xy > I_yx on mu 0.2..0.6".to_owned() } else { bad.join("; ") },
    );
    if part_a && part_b && part_c {
        Ok(detail)
    } else {
        Err(format!("a={part_a} b={part_b} c={part_c}: {detail}"))
    }
}

fn figure3() -> Check {
    let f = flow_d3(&chua(1024)?)?;
    chua_pattern(&f)?;
    Ok(format!("T = {:.4?}, sum = {:.1e}", f.net_flow, f.net_flow_sum()))
}

fn oracle_agreement() -> Check {
    let grid = |lo: f64, hi: f64| (0..5).map(move |i| lo + (hi - lo) * i as f64 / 4.0);
    let run = |lo: f64, hi: f64| -> Result<[f64; 2], String> {
        let (mut local, mut binned) = ([Vec::new(), Vec::new()], [Vec::new(), Vec::new()]);
        for eps in grid(lo, hi) {
            for mu in grid(lo, hi) {
                let ds = coupled(eps, mu, 500)?;
                let (x, y) = (&ds.channels()[0], &ds.channels()[1]);
                for (k, (s, t)) in [(x, y), (y, x)].into_iter().enumerate() {
                    local[k].push(lib(transfer_entropy_series(s, t, &EmbedConfig::default(), &TeConfig::default()))?.value_bits);
                    binned[k].push(lib(te_binned(s.values(), t.values(), &BinningConfig::default()))?);
                }
            }
        }
        Ok([spearman(&local[0], &binned[0]), spearman(&local[1], &binned[1])])
    };
    let [xy, yx] = run(0.0, 0.2)?;
    let [wide_xy, wide_yx] = run(0.0, 1.0)?;
    println!("      info: on the 5x5 grid over [0,1]^2 (crosses the synchronisation band) rho = {wide_xy:.3}, {wide_yx:.3}");
    let detail = format!("5x5 grid eps,mu in [0,0.2]: rho_xy = {xy:.3}, rho_yx = {yx:.3}");
    ensure(xy >= 0.8 && yx >= 0.8, || detail.clone())?;
    Ok(detail)
}

fn oracle_calibration() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let source: Vec<f64> = (0..10_000).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
    let mut target = vec![rng.random_range(0..2) as f64];
    target.extend_from_slice(&source[..source.len() - 1]);
    let two = BinningConfig { n_bins: 2, range: RangePolicy::DataMinMax };
    let copy = lib(te_binned(&source, &target, &two))?;
    ensure((copy - 1.0).abs() <= 0.05, || format!("copy map {copy}"))?;

    let cfg = BinningConfig::default();
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut draw = || -> Vec<f64> { (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let (a, b) = (draw(), draw());
        worst = worst.max(lib(te_binned(&a, &b, &cfg))?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut draw = || -> Vec<f64> { (0..5000).map(|_| rng.random::<f64>()).collect() };
    let (a, b) = (draw(), draw());
    let uniform = lib(te_binned(&a, &b, &cfg))?;
    println!(
        "      info: uniform iid at N=5000, 8 bins: {uniform:.4} bits (plug-in bias 7*7*8/(2N ln 2) = {:.4})",
        392.0 / (2.0 * 5000.0 * std::f64::consts::LN_2)
    );
    let detail = format!("copy map {copy:.4} bits; Gaussian iid pairs max {worst:.4} bits over 10 seeds");
    ensure(worst <= 0.05, || detail.clone())?;
    Ok(detail)
}

fn noise_robustness() -> Check {
    let clean = chua(1024)?;
    let mut flows = Vec::new();
    for seed in 1..=5u64 {
        let noisy = lib(add_measurement_noise(&clean, 0.01, seed))?;
        let f = flow_d3(&noisy)?;
        chua_pattern(&f).map_err(|e| format!("seed {seed}: {e}"))?;
        flows.push(format!("{:.3?}", f.net_flow));
    }
    Ok(format!("1% noise, seeds 1..5: {}", flows.join(" ")))
}

fn determinism(dir: &Path) -> Check {
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("sim_coupled", vec!["simulate".into(), "coupled".into(), "--eps".into(), "0.3".into(), "--mu".into(), "0.1".into(), "--n".into(), "500".into()]),
        ("sim_chua", vec!["simulate".into(), "chua".into(), "--n".into(), "1024".into(), "--noise".into(), "0.01".into(), "--seed".into(), "9".into()]),
        ("sweep", vec!["sweep".into(), "--eps-steps".into(), "6".into(), "--mu-steps".into(), "6".into(), "--order".into(), "1".into()]),
    ];
    let mut checked = Vec::new();
    let produce = |threads: &str, tag: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let mut files = Vec::new();
        for (name, args) in &runs {
            let out = dir.join(format!("{name}_{tag}.csv"));
            let mut a: Vec<&str> = vec!["--threads", threads];
            a.extend(args.iter().map(String::as_str));
            a.extend(["--out", out.to_str().unwrap()]);
            cli(&a)?;
            files.push((name.to_string(), std::fs::read(&out).map_err(|e| e.to_string())?));
        }
        let chua_csv = dir.join(format!("sim_chua_{tag}.csv"));
        for (name, cmd) in [("netflow", "netflow"), ("estimate", "estimate")] {
            let out = dir.join(format!("{name}_{tag}.csv"));
            let mut a = vec!["--threads", threads, cmd, "--input", chua_csv.to_str().unwrap()];
            if cmd == "estimate" {
                a.extend(["--source", "v2", "--target", "v1", "--d", "3", "--surrogates", "19"]);
            }
            a.extend(["--out", out.to_str().unwrap()]);
            cli(&a)?;
            files.push((name.to_string(), std::fs::read(&out).map_err(|e| e.to_string())?));
        }
        Ok(files)
    };
    let one = produce("1", "t1")?;
    let eight = produce("8", "t8")?;
    let again = produce("8", "t8b")?;
    for (((name, a), (_, b)), (_, c)) in one.iter().zip(&eight).zip(&again) {
        ensure(a == b && b == c, || format!("{name}: output differs between runs"))?;
        checked.push(name.clone());
    }
    Ok(format!("byte-identical at 1, 8, 8 threads: {}", checked.join(", ")))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    let criteria: Vec<(&str, Duration, Box<dyn Fn() -> Check + '_>)> = vec![
        ("1 density correctness", Duration::from_secs(1), Box::new(density)),
        ("2 duplicate identity", Duration::from_secs(1), Box::new(duplicate_identity)),
        ("3 net-flow antisymmetry", Duration::from_secs(120), Box::new(antisymmetry)),
        ("4 coupled-map surfaces", Duration::from_secs(120), Box::new(|| figure2(d))),
        ("5 chua net-flow sign and rank", Duration::from_secs(120), Box::new(figure3)),
        ("6 oracle rank agreement", Duration::from_secs(120), Box::new(oracle_agreement)),
        ("7 oracle calibration", Duration::from_secs(30), Box::new(oracle_calibration)),
        ("8 noise robustness", Duration::from_secs(120), Box::new(noise_robustness)),
        ("9 determinism across threads", Duration::from_secs(120), Box::new(|| determinism(d))),
    ];
    let mut failed = 0;
    for (name, budget, check) in &criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = result.and_then(|msg| {
            if took <= *budget {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {took:.2?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(msg) => println!("PASS  {name:<32} [{took:>9.2?}]  {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name:<32} [{took:>9.2?}]  {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
