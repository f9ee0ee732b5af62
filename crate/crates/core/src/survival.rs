//! Censored samples, step functions and product-limit machinery.
//!
//! Tie convention: at a tied observed time the at-risk count is
//! `Y(t) = #{X_k >= t}` for both the event and the censoring estimator, so a
//! failure at `t` is still at risk for a censoring at `t` and vice versa.
//! Left limits `K̂_c(X_i-)` exclude censorings at `X_i` itself.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{input, Error, Result};

/// Observed times `X_i = min(X'_i, C_i)` with event indicators `δ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredSample {
    times: Vec<f64>,
    events: Vec<bool>,
}

impl CensoredSample {
    pub fn new(times: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        if times.len() != events.len() {
            return input(format!(
                "times and events differ in length ({} vs {})",
                times.len(),
                events.len()
            ));
        }
        if times.len() < 2 {
            return input("censored sample needs at least 2 observations");
        }
        if let Some(bad) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return input(format!("observed times must be finite and nonnegative, got {bad}"));
        }
        Ok(CensoredSample { times, events })
    }

    /// Uncensored sample (`δ ≡ 1`).
    pub fn complete(times: Vec<f64>) -> Result<Self> {
        let events = vec![true; times.len()];
        Self::new(times, events)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|&&d| d).count()
    }

    /// Same sample with event and censoring roles swapped.
    pub fn flipped(&self) -> Self {
        CensoredSample { times: self.times.clone(), events: self.events.iter().map(|d| !d).collect() }
    }

    /// Sample with every time multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        CensoredSample { times: self.times.iter().map(|t| t * factor).collect(), events: self.events.clone() }
    }

    /// Indices ordered by time, ties keeping input order.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.times[a].total_cmp(&self.times[b]));
        idx
    }

    /// At-risk count `Y(X_i) = #{X_k >= X_i}` for every unit.
    pub fn at_risk(&self) -> Vec<usize> {
        let order = self.order();
        let n = self.len();
        let mut out = vec![0; n];
        let mut k = 0;
        while k < n {
            let t = self.times[order[k]];
            let mut end = k;
            while end < n && self.times[order[end]] == t {
                end += 1;
            }
            for &i in &order[k..end] {
                out[i] = n - k;
            }
            k = end;
        }
        out
    }

    /// Read the `time,event` CSV format.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
            .clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let (Some(tc), Some(ec)) = (col("time"), col("event")) else {
            return Err(Error::Parse { line: 1, msg: "header must contain `time,event`".into() });
        };
        let mut times = Vec::new();
        let mut events = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                msg: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let t: f64 = rec
                .get(tc)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("bad time `{}`", rec.get(tc).unwrap_or("")) })?;
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Parse { line, msg: format!("time must be finite and nonnegative, got {t}") });
            }
            let e = match rec.get(ec).unwrap_or("") {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Parse { line, msg: format!("event must be 0 or 1, got `{other}`") })
                }
            };
            times.push(t);
            events.push(e);
        }
        Self::new(times, events)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn to_csv_writer<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,event")?;
        for (t, d) in self.times.iter().zip(&self.events) {
            writeln!(w, "{t},{}", u8::from(*d))?;
        }
        Ok(())
    }
}

/// Right-continuous step function.
///
/// Holds `initial_value` on `(-∞, jump_points[0])` and `values[k]` on
/// `[jump_points[k], jump_points[k+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFn {
    jump_points: Vec<f64>,
    values: Vec<f64>,
    initial_value: f64,
}

impl StepFn {
    pub fn new(jump_points: Vec<f64>, values: Vec<f64>, initial_value: f64) -> Result<Self> {
        if jump_points.len() != values.len() {
            return input("step function needs one value per jump point");
        }
        if jump_points.windows(2).any(|w| !(w[0] < w[1])) {
            return input("step function jump points must be strictly increasing");
        }
        Ok(StepFn { jump_points, values, initial_value })
    }

    pub fn jump_points(&self) -> &[f64] {
        &self.jump_points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    pub fn is_empty(&self) -> bool {
        self.jump_points.is_empty()
    }

    /// Value at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.jump_points.partition_point(|&p| p <= x);
        if k == 0 {
            self.initial_value
        } else {
            self.values[k - 1]
        }
    }

    /// Left limit at `x`: the value just before `x`.
    pub fn eval_left(&self, x: f64) -> f64 {
        let k = self.jump_points.partition_point(|&p| p < x);
        if k == 0 {
            self.initial_value
        } else {
            self.values[k - 1]
        }
    }

    /// Value after the last jump.
    pub fn terminal_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.initial_value)
    }

    /// `1 - self`, e.g. a survival function turned into a distribution function.
    pub fn complement(&self) -> StepFn {
        StepFn {
            jump_points: self.jump_points.clone(),
            values: self.values.iter().map(|v| 1.0 - v).collect(),
            initial_value: 1.0 - self.initial_value,
        }
    }
}

/// Which indicator an estimator treats as the "event".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Event,
    Censoring,
}

impl Target {
    fn matches(self, event: bool) -> bool {
        match self {
            Target::Event => event,
            Target::Censoring => !event,
        }
    }
}

/// Distinct times with at-risk counts and target counts: `(t, Y(t), d(t))`.
fn risk_table(sample: &CensoredSample, target: Target) -> Vec<(f64, usize, usize)> {
    let order = sample.order();
    let n = sample.len();
    let mut out = Vec::new();
    let mut k = 0;
    while k < n {
        let t = sample.times[order[k]];
        let mut end = k;
        let mut d = 0;
        while end < n && sample.times[order[end]] == t {
            if target.matches(sample.events[order[end]]) {
                d += 1;
            }
            end += 1;
        }
        out.push((t, n - k, d));
        k = end;
    }
    out
}

/// Kaplan–Meier survival estimate for `target`; with `Target::Censoring` this
/// is `K̂_c`, the survival of the censoring variable.
pub fn kaplan_meier(sample: &CensoredSample, target: Target) -> Result<StepFn> {
    if sample.len() < 2 {
        return input("Kaplan-Meier needs n >= 2");
    }
    let mut s = 1.0;
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    for (t, y, d) in risk_table(sample, target) {
        if d > 0 {
            s *= 1.0 - d as f64 / y as f64;
            pts.push(t);
            vals.push(s);
        }
    }
    StepFn::new(pts, vals, 1.0)
}

/// Nelson–Aalen cumulative hazard for `target`.
pub fn nelson_aalen(sample: &CensoredSample, target: Target) -> Result<StepFn> {
    if sample.len() < 2 {
        return input("Nelson-Aalen needs n >= 2");
    }
    let mut h = 0.0;
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    for (t, y, d) in risk_table(sample, target) {
        if d > 0 {
            h += d as f64 / y as f64;
            pts.push(t);
            vals.push(h);
        }
    }
    StepFn::new(pts, vals, 0.0)
}

/// `K̂_c(X_i-)` for every unit, in input order.
pub fn censoring_survival_left(sample: &CensoredSample) -> Vec<f64> {
    let order = sample.order();
    let n = sample.len();
    let mut out = vec![0.0; n];
    let mut k_left = 1.0;
    let mut k = 0;
    while k < n {
        let t = sample.times[order[k]];
        let mut end = k;
        let mut cens = 0;
        while end < n && sample.times[order[end]] == t {
            out[order[end]] = k_left;
            if !sample.events[order[end]] {
                cens += 1;
            }
            end += 1;
        }
        k_left *= 1.0 - cens as f64 / (n - k) as f64;
        k = end;
    }
    out
}

/// IPCW weights `δ_i / K̂_c(X_i-)`.
pub fn ipcw_weights(sample: &CensoredSample) -> Result<Vec<f64>> {
    let k_left = censoring_survival_left(sample);
    sample
        .times
        .iter()
        .zip(&sample.events)
        .zip(k_left)
        .map(|((&t, &d), k)| match (d, k > 0.0) {
            (false, _) => Ok(0.0),
            (true, true) => Ok(1.0 / k),
            (true, false) => Err(Error::DegenerateWeight { time: t }),
        })
        .collect()
}

/// Maximum-likelihood mean of a censored exponential sample, `Σ X_i / Σ δ_i`.
pub fn censored_exp_mle(sample: &CensoredSample) -> Result<f64> {
    let d = sample.event_count();
    if d == 0 {
        return Err(Error::UndefinedMle);
    }
    Ok(sample.times.iter().sum::<f64>() / d as f64)
}

/// Kaplan–Meier probability mass carried by each unit, with the residual
/// mass moved onto the largest observation when that observation is censored
/// (so the masses always sum to one).
pub fn km_masses(sample: &CensoredSample) -> Result<Vec<f64>> {
    if sample.event_count() == 0 {
        return Err(Error::ZeroJump);
    }
    let order = sample.order();
    let n = sample.len();
    let mut mass = vec![0.0; n];
    let mut s = 1.0;
    let mut k = 0;
    while k < n {
        let t = sample.times[order[k]];
        let mut end = k;
        let mut d = 0;
        while end < n && sample.times[order[end]] == t {
            if sample.events[order[end]] {
                d += 1;
            }
            end += 1;
        }
        if d > 0 {
            let jump = s * d as f64 / (n - k) as f64;
            for &i in &order[k..end] {
                if sample.events[i] {
                    mass[i] = jump / d as f64;
                }
            }
            s -= jump;
        }
        if end == n && s > 0.0 {
            // Largest time carries censored units: they take the leftover mass.
            let cens: Vec<usize> = order[k..end].iter().copied().filter(|&i| !sample.events[i]).collect();
            let share = s / cens.len() as f64;
            for i in cens {
                mass[i] = share;
            }
        }
        k = end;
    }
    Ok(mass)
}

/// Draw `n` values from a nondecreasing step CDF by inverse transform.
///
/// If the CDF is defective (terminal value below one), the missing mass sits
/// at the largest jump point.
pub fn sample_from_stepfn<R: Rng + ?Sized>(dist: &StepFn, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if dist.is_empty() {
        return input("cannot sample from a step function without jumps");
    }
    let last = *dist.jump_points.last().expect("nonempty");
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let k = dist.values.partition_point(|&v| v <= u);
            if k < dist.jump_points.len() {
                dist.jump_points[k]
            } else {
                last
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn s(times: &[f64], events: &[u8]) -> CensoredSample {
        CensoredSample::new(times.to_vec(), events.iter().map(|&e| e == 1).collect()).unwrap()
    }

    #[test]
    fn sample_validation() {
        assert!(CensoredSample::new(vec![1.0], vec![true]).is_err());
        assert!(CensoredSample::new(vec![1.0, 2.0], vec![true]).is_err());
        assert!(CensoredSample::new(vec![1.0, -2.0], vec![true, true]).is_err());
        assert!(CensoredSample::new(vec![1.0, f64::NAN], vec![true, true]).is_err());
    }

    #[test]
    fn km_censoring_example() {
        let k = kaplan_meier(&s(&[1.0, 2.0, 3.0], &[1, 0, 1]), Target::Censoring).unwrap();
        for x in [0.0, 0.5, 1.0, 1.5, 2.0] {
            assert_eq!(k.eval_left(x), 1.0);
        }
        for x in [2.0001, 2.5, 3.0, 10.0] {
            assert_eq!(k.eval_left(x), 0.5);
        }
    }

    #[test]
    fn km_censoring_without_censoring_is_one() {
        let k = kaplan_meier(&s(&[1.0, 2.0, 3.0], &[1, 1, 1]), Target::Censoring).unwrap();
        assert!(k.is_empty());
        assert_eq!(k.eval(5.0), 1.0);
    }

    #[test]
    fn km_event_example() {
        let f = kaplan_meier(&s(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 0, 1]), Target::Event).unwrap();
        let expect = [(0.5, 1.0), (1.5, 0.75), (2.5, 0.5), (3.5, 0.5), (4.5, 0.0)];
        for (x, v) in expect {
            assert!((f.eval(x) - v).abs() < 1e-15, "x={x}");
        }
    }

    #[test]
    fn nelson_aalen_examples() {
        let h = nelson_aalen(&s(&[1.0, 2.0, 3.0], &[1, 0, 1]), Target::Censoring).unwrap();
        assert_eq!(h.eval(1.99), 0.0);
        assert_eq!(h.eval(2.0), 0.5);
        assert_eq!(h.eval(9.0), 0.5);

        let h = nelson_aalen(&s(&[1.0, 2.0, 3.0], &[1, 1, 1]), Target::Censoring).unwrap();
        assert_eq!(h.eval(9.0), 0.0);

        let h = nelson_aalen(&s(&[1.0, 2.0], &[1, 1]), Target::Event).unwrap();
        assert_eq!(h.eval(0.5), 0.0);
        assert_eq!(h.eval(1.5), 0.5);
        assert_eq!(h.eval(2.5), 1.5);
    }

    #[test]
    fn ipcw_examples() {
        assert_eq!(ipcw_weights(&s(&[1.0, 2.0, 3.0], &[1, 1, 1])).unwrap(), vec![1.0; 3]);
        assert_eq!(ipcw_weights(&s(&[1.0, 2.0, 3.0], &[1, 0, 1])).unwrap(), vec![1.0, 0.0, 2.0]);
    }

    #[test]
    fn ipcw_with_ties_and_exhausted_censoring_survival() {
        let smp = s(&[1.0, 1.0, 2.0], &[0, 0, 1]);
        let w = ipcw_weights(&smp).unwrap();
        assert_eq!(&w[..2], &[0.0, 0.0]);
        assert!((w[2] - 3.0).abs() < 1e-14);
        // K̂_c(3-) = 1 - 2/3 = 1/3
        let smp = s(&[1.0, 2.0, 2.0, 3.0], &[1, 0, 0, 1]);
        assert!((ipcw_weights(&smp).unwrap()[3] - 3.0).abs() < 1e-12);
        // A failure tied with censorings stays at risk, so its weight is finite
        // even when K̂_c reaches zero at that time.
        let smp = s(&[2.0, 2.0], &[0, 1]);
        assert_eq!(ipcw_weights(&smp).unwrap(), vec![0.0, 1.0]);
        let smp = s(&[1.0, 2.0, 2.0], &[1, 0, 0]);
        assert_eq!(kaplan_meier(&smp, Target::Censoring).unwrap().terminal_value(), 0.0);
        assert!(ipcw_weights(&smp).unwrap().iter().all(|w| w.is_finite()));
    }

    #[test]
    fn ipcw_weights_agree_with_stepfn_route() {
        let mut rng = stream(21, &[]);
        let smp =
            crate::distributions::generate_censored_sample(&crate::DistSpec::exp(1.0), 0.3, 200, &mut rng).unwrap();
        let k = kaplan_meier(&smp, Target::Censoring).unwrap();
        let w = ipcw_weights(&smp).unwrap();
        for i in 0..smp.len() {
            let expect = if smp.events()[i] { 1.0 / k.eval_left(smp.times()[i]) } else { 0.0 };
            assert!((w[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn ipcw_weights_are_mean_preserving() {
        let mut rng = stream(22, &[]);
        let smp =
            crate::distributions::generate_censored_sample(&crate::DistSpec::exp(1.0), 0.2, 10_000, &mut rng).unwrap();
        let w = ipcw_weights(&smp).unwrap();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn mle_examples() {
        assert_eq!(censored_exp_mle(&s(&[1.0, 2.0, 3.0], &[1, 0, 1])).unwrap(), 3.0);
        assert_eq!(censored_exp_mle(&s(&[1.0, 2.0, 3.0], &[1, 1, 1])).unwrap(), 2.0);
        assert_eq!(censored_exp_mle(&s(&[1.0, 2.0], &[0, 0])), Err(Error::UndefinedMle));

        let mut rng = stream(23, &[]);
        let smp =
            crate::distributions::generate_censored_sample(&crate::DistSpec::exp(2.0), 0.3, 100_000, &mut rng).unwrap();
        let mu = censored_exp_mle(&smp).unwrap();
        assert!((mu - 2.0).abs() < 0.05, "{mu}");
    }

    #[test]
    fn km_masses_sum_to_one() {
        let m = km_masses(&s(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 0, 1])).unwrap();
        assert_eq!(m, vec![0.25, 0.25, 0.0, 0.5]);
        let m = km_masses(&s(&[1.0, 2.0, 3.0], &[1, 1, 0])).unwrap();
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((m[2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(km_masses(&s(&[1.0, 2.0], &[0, 0])), Err(Error::ZeroJump));
    }

    #[test]
    fn stepfn_sampling() {
        let mut rng = stream(24, &[]);
        let point = StepFn::new(vec![2.0], vec![1.0], 0.0).unwrap();
        assert!(sample_from_stepfn(&point, 100, &mut rng).unwrap().iter().all(|&x| x == 2.0));

        let two = StepFn::new(vec![1.0, 2.0], vec![0.5, 1.0], 0.0).unwrap();
        let xs = sample_from_stepfn(&two, 100_000, &mut rng).unwrap();
        let frac = xs.iter().filter(|&&x| x == 1.0).count() as f64 / xs.len() as f64;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");

        let defective = StepFn::new(vec![1.0, 5.0], vec![0.3, 0.8], 0.0).unwrap();
        let xs = sample_from_stepfn(&defective, 100_000, &mut rng).unwrap();
        let at5 = xs.iter().filter(|&&x| x == 5.0).count() as f64 / xs.len() as f64;
        assert!((at5 - 0.7).abs() < 0.01);
        assert!(xs.iter().all(|&x| x == 1.0 || x == 5.0));

        let empty = StepFn::new(vec![], vec![], 0.0).unwrap();
        assert!(sample_from_stepfn(&empty, 3, &mut rng).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let smp = s(&[1.5, 2.0, 3.25], &[1, 0, 1]);
        let mut buf = Vec::new();
        smp.to_csv_writer(&mut buf).unwrap();
        assert_eq!(CensoredSample::from_csv_reader(&buf[..]).unwrap(), smp);

        let bad = "time,event\n1.0,1\n2.0,2\n";
        match CensoredSample::from_csv_reader(bad.as_bytes()) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("event"));
            }
            other => panic!("{other:?}"),
        }
        assert!(CensoredSample::from_csv_reader("t,e\n1,1\n".as_bytes()).is_err());
    }

    fn arb_sample() -> impl Strategy<Value = CensoredSample> {
        proptest::collection::vec((0u8..20, any::<bool>()), 2..40).prop_map(|v| {
            let (t, e): (Vec<f64>, Vec<bool>) = v.into_iter().map(|(t, e)| (t as f64 * 0.5, e)).unzip();
            CensoredSample::new(t, e).unwrap()
        })
    }

    proptest! {
        #[test]
        fn flipping_roles_swaps_estimators(smp in arb_sample()) {
            let a = kaplan_meier(&smp, Target::Censoring).unwrap();
            let b = kaplan_meier(&smp.flipped(), Target::Event).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn km_and_na_share_jumps_and_are_monotone(smp in arb_sample()) {
            for target in [Target::Event, Target::Censoring] {
                let km = kaplan_meier(&smp, target).unwrap();
                let na = nelson_aalen(&smp, target).unwrap();
                prop_assert_eq!(km.jump_points(), na.jump_points());
                prop_assert!(km.values().windows(2).all(|w| w[1] <= w[0]));
                prop_assert!(na.values().windows(2).all(|w| w[1] >= w[0]));
                prop_assert!(km.values().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }

        #[test]
        fn left_limit_is_value_before_jump(
            pts in proptest::collection::btree_set(0u16..1000, 1..30),
            seed in any::<u64>(),
        ) {
            let pts: Vec<f64> = pts.into_iter().map(f64::from).collect();
            let mut rng = stream(seed, &[]);
            let vals: Vec<f64> = pts.iter().map(|_| rng.random::<f64>()).collect();
            let init = rng.random::<f64>();
            let f = StepFn::new(pts.clone(), vals.clone(), init).unwrap();
            for (k, &p) in pts.iter().enumerate() {
                let before = if k == 0 { init } else { vals[k - 1] };
                prop_assert_eq!(f.eval_left(p), before);
                prop_assert_eq!(f.eval(p), vals[k]);
                prop_assert_eq!(f.eval(p - 0.5), before);
            }
        }
    }
}
