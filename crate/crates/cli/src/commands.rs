use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context as _, Result};
use localte::series::{load_csv, save_csv, Dataset, TimeSeries};
use localte::systems::{
    add_measurement_noise, integrate_rk4, iterate_coupled, sync_error, tent_orbit, ChuaParams,
    CouplingParams, TentParams, CHUA_TRANSIENT, MAP_TRANSIENT,
};
use localte::transfer::{
    directionality_index, surrogate_baseline, te_matrix, transfer_entropy_series, EmbedConfig,
    TeConfig, TeEstimate,
};
use rayon::prelude::*;

use crate::manifest::Manifest;
use crate::{EstimateArgs, EstimatorArgs, NetflowArgs, SimulateArgs, SweepArgs, System};

pub struct Context {
    pub seed: u64,
    pub threads: usize,
    pub argv: String,
}

impl Context {
    fn manifest(&self, command: &str) -> Manifest {
        let mut m = Manifest::new(command);
        m.set("argv", &self.argv).set("seed", self.seed).set("threads", self.threads);
        m
    }
}

fn record_estimator(m: &mut Manifest, embed: &EmbedConfig, cfg: &TeConfig) {
    m.set("d", embed.dim)
        .set("tau", embed.tau)
        .set("standardize", embed.standardize)
        .set("order", cfg.model.order)
        .set("k", cfg.model.k)
        .set("m", cfg.model.m.map_or("auto".to_owned(), |m| m.to_string()))
        .set("window", cfg.model.window)
        .set("r_policy", cfg.policy);
}

fn write_output(path: &Path, text: &str, manifest: &Manifest) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    manifest.write_for(path)?;
    Ok(())
}

fn load(path: &Path, est: &EstimatorArgs) -> Result<Dataset> {
    load_csv(path, est.delimiter()?).with_context(|| format!("loading {}", path.display()))
}

pub fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<()> {
    let mut m = ctx.manifest("simulate");
    m.set("n", a.n);
    let dataset = match a.system {
        System::Tent => {
            let transient = a.transient.unwrap_or(MAP_TRANSIENT);
            m.set("system", "tent").set("a", a.a).set("x0", a.x0).set("transient", transient);
            let x = tent_orbit(TentParams::new(a.a)?, a.x0, a.n, transient)?;
            Dataset::new(vec![TimeSeries::new("x", x)?])?
        }
        System::Coupled => {
            let transient = a.transient.unwrap_or(MAP_TRANSIENT);
            m.set("system", "coupled")
                .set("a", a.a)
                .set("eps", a.eps)
                .set("mu", a.mu)
                .set("x0", a.x0)
                .set("y0", a.y0)
                .set("transient", transient);
            iterate_coupled(CouplingParams::new(a.eps, a.mu, a.a)?, a.x0, a.y0, a.n, transient)?
        }
        System::Chua => {
            let transient = a.transient.unwrap_or(CHUA_TRANSIENT);
            let params = ChuaParams {
                alpha: a.alpha,
                beta: a.beta,
                m0: a.m0,
                m1: a.m1,
                dt: a.dt,
                stride: a.stride,
            };
            let state0 = [a.state0[0], a.state0[1], a.state0[2]];
            m.set("system", "chua")
                .set("alpha", a.alpha)
                .set("beta", a.beta)
                .set("m0", a.m0)
                .set("m1", a.m1)
                .set("dt", a.dt)
                .set("stride", a.stride)
                .set("state0", format!("{},{},{}", state0[0], state0[1], state0[2]))
                .set("transient", transient);
            integrate_rk4(&params, state0, a.n, transient)?
        }
    };
    let dataset = if a.noise != 0.0 {
        m.set("noise", a.noise);
        add_measurement_noise(&dataset, a.noise, ctx.seed)?
    } else {
        dataset
    };
    save_csv(&dataset, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    m.write_for(&a.out)?;
    eprintln!("wrote {} samples x {} channels to {}", dataset.len(), dataset.width(), a.out.display());
    Ok(())
}

fn channel<'a>(ds: &'a Dataset, name: &str, path: &Path) -> Result<&'a TimeSeries> {
    ds.channel(name).with_context(|| {
        format!(
            "column {name:?} not found in {}; available: {}",
            path.display(),
            ds.names().join(", ")
        )
    })
}

fn describe(label: &str, e: &TeEstimate) -> String {
    format!(
        "I({label}) = {} bits  (N={}, r_joint={}, r_self={}, sigma_joint={}, sigma_self={}, clamped={})",
        e.value_bits, e.n_samples, e.r_used_joint, e.r_used_self, e.sigma_joint, e.sigma_self, e.clamped
    )
}

pub fn estimate(ctx: &Context, a: &EstimateArgs) -> Result<()> {
    let (embed, mut cfg) = a.est.resolve(1)?;
    cfg.keep_per_sample = a.dump.is_some();
    let ds = load(&a.input, &a.est)?;
    let src = channel(&ds, &a.source, &a.input)?;
    let tgt = channel(&ds, &a.target, &a.input)?;

    let (st, ts) = rayon::join(
        || transfer_entropy_series(src, tgt, &embed, &cfg),
        || transfer_entropy_series(tgt, src, &embed, &cfg),
    );
    let (st, ts) = (st?, ts?);
    let di = directionality_index(&st, &ts).ok();

    let fwd = format!("{}->{}", a.source, a.target);
    let bwd = format!("{}->{}", a.target, a.source);
    println!("input: {} ({} rows)", a.input.display(), ds.len());
    println!("{}", describe(&fwd, &st));
    println!("{}", describe(&bwd, &ts));
    match di {
        Some(v) => println!("directionality index ({fwd}) = {v}"),
        None => println!("directionality index ({fwd}) = undefined (I sum is zero)"),
    }

    let mut m = ctx.manifest("estimate");
    m.input(&a.input)?
        .set("source", &a.source)
        .set("target", &a.target)
        .set("clamped", st.clamped + ts.clamped);
    record_estimator(&mut m, &embed, &cfg);

    let mut surrogates = Vec::new();
    if let Some(n_sur) = a.surrogates {
        m.set("surrogates", n_sur);
        for (label, s, t) in [(&fwd, src, tgt), (&bwd, tgt, src)] {
            let sum = surrogate_baseline(s, t, &embed, &cfg, n_sur, ctx.seed)?;
            println!(
                "surrogates {label}: mean={} std={} z={}",
                sum.mean,
                sum.std,
                sum.z_score()
            );
            surrogates.push(sum);
        }
    }

    if let Some(out) = &a.out {
        let mut csv = String::from(
            "direction,te_bits,n_samples,r_joint,r_self,sigma_joint,sigma_self,clamped,surrogate_mean,surrogate_std\n",
        );
        for (i, (label, e)) in [(&fwd, &st), (&bwd, &ts)].into_iter().enumerate() {
            let (mean, std) = surrogates
                .get(i)
                .map_or((String::new(), String::new()), |s| (s.mean.to_string(), s.std.to_string()));
            writeln!(
                csv,
                "{label},{},{},{},{},{},{},{},{mean},{std}",
                e.value_bits, e.n_samples, e.r_used_joint, e.r_used_self, e.sigma_joint, e.sigma_self, e.clamped
            )?;
        }
        write_output(out, &csv, &m)?;
    }

    if let Some(dump) = &a.dump {
        let times = embed.embed(tgt)?;
        let (Some(f), Some(b)) = (&st.per_sample_logs, &ts.per_sample_logs) else {
            bail!("per-sample log-ratios were not retained");
        };
        let mut csv = format!("time,{fwd},{bwd}\n");
        for ((t, x), y) in times.source_indices().iter().zip(f).zip(b) {
            writeln!(csv, "{},{x},{y}", t + 1)?;
        }
        write_output(dump, &csv, &m)?;
    }
    Ok(())
}

fn grid(name: &str, lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    ensure!(steps >= 1, "--{name}-steps must be at least 1");
    ensure!(
        (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi,
        "{name} grid [{lo}, {hi}] must satisfy 0 <= min <= max <= 1"
    );
    if steps == 1 {
        ensure!(lo == hi, "a single {name} step needs --{name}-min equal to --{name}-max");
        return Ok(vec![lo]);
    }
    Ok((0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect())
}

pub struct SweepRow {
    pub eps: f64,
    pub mu: f64,
    pub sync_err: f64,
    pub i_xy: f64,
    pub i_yx: f64,
    pub clamped: usize,
}

pub fn sweep(ctx: &Context, a: &SweepArgs) -> Result<()> {
    let (embed, cfg) = a.est.resolve(1)?;
    let eps = grid("eps", a.eps_min, a.eps_max, a.eps_steps)?;
    let mu = grid("mu", a.mu_min, a.mu_max, a.mu_steps)?;
    TentParams::new(a.a)?;
    let cells: Vec<(f64, f64)> = eps.iter().flat_map(|&e| mu.iter().map(move |&m| (e, m))).collect();

    let rows = cells
        .par_iter()
        .map(|&(e, m)| -> Result<SweepRow> {
            let run = || -> Result<SweepRow> {
                let ds = iterate_coupled(CouplingParams::new(e, m, a.a)?, a.x0, a.y0, a.n, a.transient)?;
                let (x, y) = (&ds.channels()[0], &ds.channels()[1]);
                let xy = transfer_entropy_series(x, y, &embed, &cfg)?;
                let yx = transfer_entropy_series(y, x, &embed, &cfg)?;
                Ok(SweepRow {
                    eps: e,
                    mu: m,
                    sync_err: sync_error(&ds)?,
                    i_xy: xy.value_bits,
                    i_yx: yx.value_bits,
                    clamped: xy.clamped + yx.clamped,
                })
            };
            run().with_context(|| format!("cell eps={e}, mu={m}"))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("eps,mu,sync_err,i_xy,i_yx\n");
    for r in &rows {
        writeln!(csv, "{},{},{},{},{}", r.eps, r.mu, r.sync_err, r.i_xy, r.i_yx)?;
    }
    let mut m = ctx.manifest("sweep");
    m.set("eps", format!("{}:{}:{}", a.eps_min, a.eps_max, a.eps_steps))
        .set("mu", format!("{}:{}:{}", a.mu_min, a.mu_max, a.mu_steps))
        .set("a", a.a)
        .set("n", a.n)
        .set("transient", a.transient)
        .set("x0", a.x0)
        .set("y0", a.y0)
        .set("clamped", rows.iter().map(|r| r.clamped).sum::<usize>());
    record_estimator(&mut m, &embed, &cfg);
    write_output(&a.out, &csv, &m)?;
    eprintln!("wrote {} cells to {}", rows.len(), a.out.display());
    Ok(())
}

pub fn netflow(ctx: &Context, a: &NetflowArgs) -> Result<()> {
    let (embed, cfg) = a.est.resolve(3)?;
    let ds = load(&a.input, &a.est)?;
    ensure!(ds.width() >= 2, "net flow needs at least 2 columns, {} has {}", a.input.display(), ds.width());
    let flow = te_matrix(&ds, &embed, &cfg)?;

    let width = flow.labels.iter().map(String::len).max().unwrap_or(0).max(8);
    let mut table = format!("{:>width$}", "from\\to");
    for l in &flow.labels {
        write!(table, " {l:>12}")?;
    }
    table.push('\n');
    for (l, row) in flow.labels.iter().zip(&flow.te_matrix) {
        write!(table, "{l:>width$}")?;
        for v in row {
            write!(table, " {v:>12.6}")?;
        }
        table.push('\n');
    }
    print!("{table}");
    for (l, t) in flow.labels.iter().zip(&flow.net_flow) {
        println!("T[{l}] = {t}");
    }
    println!("sum T = {}", flow.net_flow_sum());
    if flow.clamped > 0 {
        println!("clamped log-ratios: {}", flow.clamped);
    }

    if let Some(out) = &a.out {
        let mut csv = String::from("channel");
        for l in &flow.labels {
            write!(csv, ",te_to_{l}")?;
        }
        csv.push_str(",net_flow\n");
        for ((l, row), t) in flow.labels.iter().zip(&flow.te_matrix).zip(&flow.net_flow) {
            csv.push_str(l);
            for v in row {
                write!(csv, ",{v}")?;
            }
            writeln!(csv, ",{t}")?;
        }
        let mut m = ctx.manifest("netflow");
        m.input(&a.input)?.set("clamped", flow.clamped);
        record_estimator(&mut m, &embed, &cfg);
        write_output(out, &csv, &m)?;
    }
    Ok(())
}
