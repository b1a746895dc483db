//! Run records and byte-deterministic CSV rendering.
//!
//! A run with the same configuration and seed must produce the same bytes,
//! so all floating-point output goes through a fixed 12-significant-digit
//! formatter equivalent to C's `%.12g`.

/// Why a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopReason {
    /// All requested iterations executed.
    Completed,
    /// No maximizer or expander candidate remained.
    NoCandidate,
    /// The objective failed; the partial log is still valid.
    ObjectiveFailure(String),
}

impl StopReason {
    pub fn label(&self) -> &str {
        match self {
            StopReason::Completed => "completed",
            StopReason::NoCandidate => "no_candidate",
            StopReason::ObjectiveFailure(_) => "objective_failure",
        }
    }
}

/// One iteration of a run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub iteration: usize,
    pub point: Vec<f64>,
    pub observation: f64,
    /// Certified (or fixed) norm bound on the global domain this iteration.
    pub bound: f64,
    /// Confidence width on the global domain.
    pub beta: f64,
    /// Acquisition uncertainty of the chosen candidate.
    pub omega: f64,
    pub safe_count: usize,
    pub maximizer_count: usize,
    pub expander_count: usize,
    /// Largest certified lower bound over the safe set.
    pub best_lower_bound: f64,
    /// Sub-domain that proposed the sample; 0 is the global domain.
    pub cube_id: u64,
    pub cube_width: f64,
    /// Norm bound of the proposing sub-domain.
    pub cube_bound: f64,
    /// Observation fell below the safety threshold.
    pub violation: bool,
    /// Empty-intersection fallbacks this iteration.
    pub warnings: u32,
}

/// Per-cube acquisition proposal, kept for diagnostics and tests; not part
/// of the CSV.
#[derive(Debug, Clone)]
pub struct CubeProposal {
    pub cube_id: u64,
    pub cube_width: f64,
    pub bound: f64,
    pub point: Vec<f64>,
    pub omega: f64,
}

/// Full record of a run: configuration echo, per-iteration rows, outcome.
#[derive(Debug, Clone)]
pub struct RunLog {
    /// Ordered `key = value` pairs echoed into the CSV header.
    pub config: Vec<(String, String)>,
    pub seed: u64,
    pub rows: Vec<RunRecord>,
    /// Best safely evaluable parameter and its certified lower bound.
    pub best: Option<(Vec<f64>, f64)>,
    pub stop: StopReason,
    /// Per-iteration cube proposals (localized runs only).
    pub proposals: Vec<Vec<CubeProposal>>,
}

impl RunLog {
    /// Renders the log as CSV with a commented header; deterministic bytes.
    pub fn to_csv(&self) -> String {
        let dim = self.rows.first().map_or(1, |r| r.point.len());
        let mut out = String::new();
        out.push_str(&format!("# artifact = safebo {}\n", env!("CARGO_PKG_VERSION")));
        let mut canonical = String::new();
        for (k, v) in &self.config {
            canonical.push_str(&format!("{k} = {v}\n"));
        }
        out.push_str(&format!("# config_hash = {:016x}\n", fnv1a(canonical.as_bytes())));
        for (k, v) in &self.config {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&format!("# seed = {}\n", self.seed));
        out.push_str(&format!("# stop_reason = {}\n", self.stop.label()));
        if let Some((point, value)) = &self.best {
            let coords: Vec<String> = point.iter().map(|&x| fmt_g(x, 12)).collect();
            out.push_str(&format!(
                "# best_parameter = {}\n# best_lower_bound = {}\n",
                coords.join(" "),
                fmt_g(*value, 12)
            ));
        }
        out.push('t');
        for d in 1..=dim {
            out.push_str(&format!(",a_{d}"));
        }
        out.push_str(
            ",y,b,beta,omega,safe_count,maximizer_count,expander_count,best_lower_bound,cube_id,cube_width,cube_b,violation,warnings\n",
        );
        for r in &self.rows {
            out.push_str(&r.iteration.to_string());
            for &x in &r.point {
                out.push(',');
                out.push_str(&fmt_g(x, 12));
            }
            for v in [r.observation, r.bound, r.beta, r.omega] {
                out.push(',');
                out.push_str(&fmt_g(v, 12));
            }
            out.push_str(&format!(
                ",{},{},{}",
                r.safe_count, r.maximizer_count, r.expander_count
            ));
            out.push(',');
            out.push_str(&fmt_g(r.best_lower_bound, 12));
            out.push_str(&format!(",{}", r.cube_id));
            for v in [r.cube_width, r.cube_bound] {
                out.push(',');
                out.push_str(&fmt_g(v, 12));
            }
            out.push_str(&format!(
                ",{},{}\n",
                if r.violation { 1 } else { 0 },
                r.warnings
            ));
        }
        out
    }

    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violation).count()
    }
}

/// FNV-1a over bytes; stable across platforms.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Formats like C's `%.<sig>g`: `sig` significant digits, trailing zeros
/// trimmed, scientific notation outside `[1e-4, 10^sig)`.
pub fn fmt_g(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let neg = x < 0.0;
    // round to `sig` digits via the exponential formatter, then re-lay out
    let s = format!("{:.*e}", sig - 1, x.abs());
    let (mantissa, exp_str) = s.split_once('e').expect("exponential format");
    let exp: i32 = exp_str.parse().expect("exponent");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let body = if exp < -4 || exp >= sig as i32 {
        let mant = if digits.len() == 1 {
            digits.to_string()
        } else {
            format!("{}.{}", &digits[..1], &digits[1..])
        };
        format!("{mant}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else if exp >= 0 {
        let e = exp as usize;
        if digits.len() > e + 1 {
            format!("{}.{}", &digits[..=e], &digits[e + 1..])
        } else {
            format!("{}{}", digits, "0".repeat(e + 1 - digits.len()))
        }
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}
