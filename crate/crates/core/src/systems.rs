//! Test systems: skew tent map, two coupled tent maps, Chua's circuit.
//!
//! Map orbits are iterated with [`refresh_low_bits`] applied after every
//! step. With a dyadic apex such as `a = 0.5` the map multiplies by 2
//! exactly, so a plain double-precision orbit runs out of mantissa bits and
//! lands on the fixed point 0 within about 55 iterates. Refreshing the
//! lowest bits from a hash of the current value stands in for the digits a
//! real-valued orbit would keep supplying. The hash depends only on the
//! value, so identical states stay identical (synchronised orbits remain
//! exactly synchronised).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::series::{Dataset, TimeSeries};
use crate::{Error, Result};

/// Mantissa bits replaced by [`refresh_low_bits`].
pub const REFRESH_BITS: u32 = 8;

/// Tolerance for clipping a coupling argument back into `[0, 1]`.
const CLIP_TOL: f64 = 1e-12;

/// Transient iterates discarded by default for maps.
pub const MAP_TRANSIENT: usize = 1000;
/// Transient RK4 steps discarded by default for Chua's circuit.
pub const CHUA_TRANSIENT: usize = 10_000;
/// Default seeds for coupled-map sweeps.
pub const DEFAULT_SEEDS: (f64, f64) = (0.345678, 0.789012);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TentParams {
    a: f64,
}

impl TentParams {
    pub fn new(a: f64) -> Result<Self> {
        if a > 0.0 && a < 1.0 {
            Ok(Self { a })
        } else {
            Err(Error::InvalidParameter(format!(
                "tent map apex a must satisfy 0 < a < 1, got {a}"
            )))
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

/// Skew tent map: `x/a` on `[0, a]`, `(1−x)/(1−a)` on `(a, 1]`.
pub fn tent_step(params: TentParams, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!(
            "tent map argument must lie in [0, 1], got {x}"
        )));
    }
    Ok(tent(params.a, x))
}

fn tent(a: f64, x: f64) -> f64 {
    if x <= a {
        x / a
    } else {
        (1.0 - x) / (1.0 - a)
    }
}

/// Replaces the lowest [`REFRESH_BITS`] mantissa bits of `x ∈ (0, 1)` with
/// a hash of `x`. `0` and `1` pass through unchanged.
pub fn refresh_low_bits(x: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return x;
    }
    let bits = x.to_bits();
    let mask = (1u64 << REFRESH_BITS) - 1;
    f64::from_bits((bits & !mask) | (splitmix64(bits) & mask))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_seed(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Orbit of the skew tent map: `transient` iterates are discarded and the
/// next `n` returned.
pub fn tent_orbit(params: TentParams, x0: f64, n: usize, transient: usize) -> Result<Vec<f64>> {
    check_seed("x0", x0)?;
    let mut x = x0;
    let mut out = Vec::with_capacity(n);
    for step in 0..transient + n {
        x = refresh_low_bits(tent(params.a, x));
        if step >= transient {
            out.push(x);
        }
    }
    Ok(out)
}

/// Parameters of the coupled pair
/// `x' = f(x + ε(y − x))`, `y' = f(y + μ(x − y))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    pub eps: f64,
    pub mu: f64,
    pub tent: TentParams,
}

impl CouplingParams {
    pub fn new(eps: f64, mu: f64, a: f64) -> Result<Self> {
        for (name, v) in [("eps", eps), ("mu", mu)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "coupling {name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(Self {
            eps,
            mu,
            tent: TentParams::new(a)?,
        })
    }
}

fn coupling_arg(own: f64, other: f64, c: f64, step: usize) -> Result<f64> {
    let v = own + c * (other - own);
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else if v > -CLIP_TOL && v < 1.0 + CLIP_TOL {
        Ok(v.clamp(0.0, 1.0))
    } else {
        Err(Error::Diverged { step })
    }
}

/// Iterates the coupled maps; returns channels `x`, `y` of length `n`
/// after discarding `transient` iterates.
pub fn iterate_coupled(
    params: CouplingParams,
    x0: f64,
    y0: f64,
    n: usize,
    transient: usize,
) -> Result<Dataset> {
    check_seed("x0", x0)?;
    check_seed("y0", y0)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let a = params.tent.a;
    let (mut x, mut y) = (x0, y0);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for step in 0..transient + n {
        let ax = coupling_arg(x, y, params.eps, step)?;
        let ay = coupling_arg(y, x, params.mu, step)?;
        x = refresh_low_bits(tent(a, ax));
        y = refresh_low_bits(tent(a, ay));
        if step >= transient {
            xs.push(x);
            ys.push(y);
        }
    }
    Dataset::new(vec![TimeSeries::new("x", xs)?, TimeSeries::new("y", ys)?])
}

/// `|x_N − y_N|` for a two-channel dataset.
pub fn sync_error(dataset: &Dataset) -> Result<f64> {
    if dataset.width() != 2 {
        return Err(Error::InvalidParameter(format!(
            "synchronisation error needs exactly 2 channels, got {}",
            dataset.width()
        )));
    }
    let last = |i: usize| *dataset.channels()[i].values().last().unwrap();
    Ok((last(0) - last(1)).abs())
}

/// Dimensionless Chua circuit with a piecewise-linear diode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChuaParams {
    pub alpha: f64,
    pub beta: f64,
    /// Inner diode slope.
    pub m0: f64,
    /// Outer diode slope.
    pub m1: f64,
    pub dt: f64,
    /// Integration steps between recorded samples.
    pub stride: usize,
}

impl Default for ChuaParams {
    /// Double-scroll regime: α=9, β=100/7, m0=−8/7, m1=−5/7, dt=0.01,
    /// one sample every 5 steps.
    fn default() -> Self {
        Self {
            alpha: 9.0,
            beta: 100.0 / 7.0,
            m0: -8.0 / 7.0,
            m1: -5.0 / 7.0,
            dt: 0.01,
            stride: 5,
        }
    }
}

impl ChuaParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.beta, self.m0, self.m1, self.dt]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("Chua parameters must be finite".into()));
        }
        if self.alpha <= 0.0 || self.beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha and beta must be positive, got {} and {}",
                self.alpha, self.beta
            )));
        }
        if self.dt <= 0.0 || self.stride == 0 {
            return Err(Error::InvalidParameter(format!(
                "dt and stride must be positive, got {} and {}",
                self.dt, self.stride
            )));
        }
        Ok(())
    }

    /// `g(x) = m1·x + ½(m0 − m1)(|x+1| − |x−1|)`.
    pub fn diode(&self, x: f64) -> f64 {
        self.m1 * x + 0.5 * (self.m0 - self.m1) * ((x + 1.0).abs() - (x - 1.0).abs())
    }
}

/// Vector field `(α(y − x − g(x)), x − y + z, −β y)`.
pub fn chua_rhs(params: &ChuaParams, s: &[f64; 3]) -> [f64; 3] {
    let [x, y, z] = *s;
    [
        params.alpha * (y - x - params.diode(x)),
        x - y + z,
        -params.beta * y,
    ]
}

/// One classical fourth-order Runge–Kutta step of `ds/dt = f(s)`.
pub fn rk4_step<const N: usize>(f: impl Fn(&[f64; N]) -> [f64; N], s: &[f64; N], dt: f64) -> [f64; N] {
    let axpy = |base: &[f64; N], k: &[f64; N], h: f64| -> [f64; N] {
        std::array::from_fn(|i| base[i] + h * k[i])
    };
    let k1 = f(s);
    let k2 = f(&axpy(s, &k1, dt / 2.0));
    let k3 = f(&axpy(s, &k2, dt / 2.0));
    let k4 = f(&axpy(s, &k3, dt));
    std::array::from_fn(|i| s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Integrates Chua's circuit; returns channels `v1`, `v2`, `il`.
///
/// `transient` steps are discarded, then the state is recorded every
/// `stride` steps until `n_samples` samples are collected.
pub fn integrate_rk4(
    params: &ChuaParams,
    state0: [f64; 3],
    n_samples: usize,
    transient: usize,
) -> Result<Dataset> {
    params.validate()?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let f = |s: &[f64; 3]| chua_rhs(params, s);
    let mut s = state0;
    let mut cols: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(n_samples));
    let total = transient + (n_samples - 1) * params.stride;
    for step in 0..=total {
        if step >= transient && (step - transient).is_multiple_of(params.stride) {
            for (c, v) in cols.iter_mut().zip(s) {
                c.push(v);
            }
        }
        if step < total {
            s = rk4_step(f, &s, params.dt);
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { step: step + 1 });
            }
        }
    }
    let [v1, v2, il] = cols;
    let dt = params.dt * params.stride as f64;
    Dataset::new(vec![
        TimeSeries::new("v1", v1)?.with_dt(dt)?,
        TimeSeries::new("v2", v2)?.with_dt(dt)?,
        TimeSeries::new("il", il)?.with_dt(dt)?,
    ])
}

/// Adds seeded Gaussian measurement noise with standard deviation
/// `relative × (channel standard deviation)` to every channel.
pub fn add_measurement_noise(dataset: &Dataset, relative: f64, seed: u64) -> Result<Dataset> {
    if !(relative.is_finite() && relative >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "relative noise level must be nonnegative, got {relative}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = dataset
        .channels()
        .iter()
        .map(|ch| {
            let v = ch.values();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            let noise = Normal::new(0.0, relative * sd)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let noisy: Vec<f64> = v.iter().map(|x| x + noise.sample(&mut rng)).collect();
            TimeSeries::new(ch.name(), noisy)?.with_dt(ch.dt())
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tp(a: f64) -> TentParams {
        TentParams::new(a).unwrap()
    }

    #[test]
    fn tent_examples() {
        assert_eq!(tent_step(tp(0.65), 0.65).unwrap(), 1.0);
        assert_eq!(tent_step(tp(0.65), 1.0).unwrap(), 0.0);
        assert_eq!(tent_step(tp(0.5), 0.25).unwrap(), 0.5);
        assert!(tent_step(tp(0.5), 1.2).is_err());
        assert!(TentParams::new(1.2).is_err());
        assert!(TentParams::new(0.0).is_err());
    }

    #[test]
    fn dyadic_orbit_does_not_collapse() {
        let v = tent_orbit(tp(0.5), 0.345678, 500, 1000).unwrap();
        let distinct = {
            let mut s: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
            s.sort_unstable();
            s.dedup();
            s.len()
        };
        assert_eq!(distinct, 500);
        let mean = v.iter().sum::<f64>() / 500.0;
        assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn refresh_is_tiny_and_deterministic() {
        for x in [1e-9, 0.1, 0.5, 0.999_999] {
            let y = refresh_low_bits(x);
            assert!((y - x).abs() <= x * 2f64.powi(-44));
            assert_eq!(y, refresh_low_bits(x));
        }
        assert_eq!(refresh_low_bits(0.0), 0.0);
        assert_eq!(refresh_low_bits(1.0), 1.0);
    }

    #[test]
    fn uncoupled_matches_solo_runs() {
        let p = CouplingParams::new(0.0, 0.0, 0.65).unwrap();
        let ds = iterate_coupled(p, 0.2, 0.7, 300, 50).unwrap();
        let sx = tent_orbit(tp(0.65), 0.2, 300, 50).unwrap();
        let sy = tent_orbit(tp(0.65), 0.7, 300, 50).unwrap();
        assert_eq!(ds.channel("x").unwrap().values(), &sx[..]);
        assert_eq!(ds.channel("y").unwrap().values(), &sy[..]);
    }

    #[test]
    fn symmetric_identical_seeds_stay_synchronised() {
        let p = CouplingParams::new(0.5, 0.5, 0.5).unwrap();
        let ds = iterate_coupled(p, 0.3, 0.3, 400, 0).unwrap();
        assert_eq!(ds.channels()[0].values(), ds.channels()[1].values());
    }

    #[test]
    fn strong_symmetric_coupling_synchronises() {
        let p = CouplingParams::new(0.45, 0.45, 0.5).unwrap();
        let ds = iterate_coupled(p, 0.345678, 0.789012, 500, 1000).unwrap();
        assert!(sync_error(&ds).unwrap() < 1e-6);
    }

    #[test]
    fn sync_error_examples() {
        let two = |a: Vec<f64>, b: Vec<f64>| {
            Dataset::new(vec![TimeSeries::new("x", a).unwrap(), TimeSeries::new("y", b).unwrap()])
                .unwrap()
        };
        assert_eq!(sync_error(&two(vec![0.1, 0.4], vec![0.1, 0.4])).unwrap(), 0.0);
        assert!((sync_error(&two(vec![0.0, 0.7], vec![0.0, 0.2])).unwrap() - 0.5).abs() < 1e-15);
        let one = Dataset::new(vec![TimeSeries::new("x", vec![1.0, 2.0]).unwrap()]).unwrap();
        assert!(sync_error(&one).is_err());
    }

    #[test]
    fn chua_rhs_examples() {
        let p = ChuaParams::default();
        assert_eq!(chua_rhs(&p, &[0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
        assert!((p.diode(1.0) - (-8.0 / 7.0)).abs() < 1e-15);
        assert!((p.diode(-1.0) - 8.0 / 7.0).abs() < 1e-15);
        assert!((p.diode(2.0) - (-8.0 / 7.0 - 5.0 / 7.0)).abs() < 1e-14);
    }

    #[test]
    fn rk4_exponential_decay() {
        let f = |s: &[f64; 1]| [-s[0]];
        let run = |dt: f64, steps: usize| {
            let mut s = [1.0];
            for _ in 0..steps {
                s = rk4_step(f, &s, dt);
            }
            s[0]
        };
        let exact = (-1f64).exp();
        let e1 = (run(0.01, 100) - exact).abs();
        assert!(e1 < 1e-8, "{e1}");
        let coarse = (run(0.1, 10) - exact).abs();
        let fine = (run(0.05, 20) - exact).abs();
        let ratio = coarse / fine;
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn chua_origin_is_equilibrium() {
        let ds = integrate_rk4(&ChuaParams::default(), [0.0; 3], 100, 0).unwrap();
        for ch in ds.channels() {
            assert!(ch.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn chua_shape_and_validation() {
        let p = ChuaParams::default();
        let ds = integrate_rk4(&p, [0.1, 0.0, 0.0], 64, 100).unwrap();
        assert_eq!(ds.names(), vec!["v1", "v2", "il"]);
        assert_eq!(ds.len(), 64);
        assert!((ds.channels()[0].dt() - 0.05).abs() < 1e-15);
        let bad = ChuaParams { dt: 0.0, ..p };
        assert!(integrate_rk4(&bad, [0.1, 0.0, 0.0], 10, 0).is_err());
        assert!(integrate_rk4(&p, [0.1, 0.0, 0.0], 0, 0).is_err());
    }

    #[test]
    fn chua_double_scroll_bounded_and_aperiodic() {
        let p = ChuaParams { stride: 1, ..ChuaParams::default() };
        let ds = integrate_rk4(&p, [0.1, 0.0, 0.0], 100_000, CHUA_TRANSIENT).unwrap();
        let max_abs = ds
            .channels()
            .iter()
            .flat_map(|c| c.values().iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs < 50.0);
        let v1 = ds.channels()[0].values();
        assert!(v1.iter().any(|&v| v > 1.0) && v1.iter().any(|&v| v < -1.0));

        // No sample within the last 10^4 repeats the first to 1e-6.
        let states: Vec<[f64; 3]> = (0..10_000)
            .map(|i| std::array::from_fn(|c| ds.channels()[c].values()[i]))
            .collect();
        let first = states[0];
        let repeats = states[1..]
            .iter()
            .filter(|s| s.iter().zip(&first).all(|(a, b)| (a - b).abs() < 1e-6))
            .count();
        assert_eq!(repeats, 0);
    }

    #[test]
    fn noise_is_seeded() {
        let ds = integrate_rk4(&ChuaParams::default(), [0.1, 0.0, 0.0], 200, 1000).unwrap();
        let a = add_measurement_noise(&ds, 0.01, 3).unwrap();
        let b = add_measurement_noise(&ds, 0.01, 3).unwrap();
        let c = add_measurement_noise(&ds, 0.01, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(add_measurement_noise(&ds, 0.0, 1).unwrap(), ds);
    }

    proptest! {
        #[test]
        fn tent_maps_unit_interval(a in 0.01f64..0.99, x in 0.0f64..=1.0) {
            let y = tent_step(tp(a), x).unwrap();
            prop_assert!((0.0..=1.0).contains(&y));
            prop_assert_eq!(tent_step(tp(a), a).unwrap(), 1.0);
        }

        #[test]
        fn coupled_stays_in_unit_interval(
            eps in 0.0f64..=1.0, mu in 0.0f64..=1.0, a in 0.05f64..0.95,
            x0 in 0.0f64..=1.0, y0 in 0.0f64..=1.0,
        ) {
            let p = CouplingParams::new(eps, mu, a).unwrap();
            let ds = iterate_coupled(p, x0, y0, 200, 20).unwrap();
            for ch in ds.channels() {
                prop_assert!(ch.values().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
