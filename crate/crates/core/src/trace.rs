//! Run records: per-event rows, CSV round-tripping, attained-value windows and validation.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::{CoordBox, Point};

/// One update of one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateEvent {
    pub seq: usize,
    pub time: f64,
    pub coord: usize,
    /// Time of the previous update to `coord` (0 for its first update).
    pub tau: f64,
    /// The stale point the gradient was read at, when recorded.
    pub view: Option<Point>,
    /// Gradient-like quantity driving the step.
    pub g_tilde: f64,
    /// Partial derivative at the true current point, for diagnostics.
    pub g_fresh: f64,
    pub gamma: f64,
    pub delta_p: f64,
    pub value_before: f64,
    pub value_after: f64,
    pub phi_after: f64,
    /// Extra per-event columns declared by the update rule.
    pub aux: Vec<f64>,
}

impl UpdateEvent {
    pub fn delta_t(&self) -> f64 {
        self.time - self.tau
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TraceMeta {
    pub problem: String,
    pub schedule: String,
    pub staleness: String,
    pub seed: u64,
}

/// Complete record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub initial: Point,
    pub events: Vec<UpdateEvent>,
    pub horizon: f64,
    pub meta: TraceMeta,
    pub aux_names: Vec<String>,
}

const BASE_COLUMNS: [&str; 11] = [
    "seq",
    "time",
    "coord",
    "tau",
    "g_tilde",
    "g_fresh",
    "gamma",
    "delta_p",
    "value_before",
    "value_after",
    "phi_after",
];

impl Trace {
    pub fn new(initial: Point, horizon: f64) -> Self {
        Trace { initial, events: Vec::new(), horizon, meta: TraceMeta::default(), aux_names: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    /// Point after the last event.
    pub fn final_point(&self) -> Point {
        let mut p = self.initial.clone();
        for e in &self.events {
            p[e.coord] = e.value_after;
        }
        p
    }

    /// Point just before time `t` (events at exactly `t` are not applied).
    pub fn point_at(&self, t: f64) -> Point {
        let mut p = self.initial.clone();
        for e in self.events.iter().take_while(|e| e.time < t) {
            p[e.coord] = e.value_after;
        }
        p
    }

    pub fn aux_index(&self, name: &str) -> Option<usize> {
        self.aux_names.iter().position(|a| a == name)
    }

    /// Writes the CSV form: `#` metadata lines, a header row, one row per event.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        let werr = |e: std::io::Error| Error::Trace(format!("write failed: {e}"));
        writeln!(out, "# horizon={}", fmt_f(self.horizon)).map_err(werr)?;
        let p0: Vec<String> = self.initial.iter().map(|&x| fmt_f(x)).collect();
        writeln!(out, "# initial={}", p0.join(" ")).map_err(werr)?;
        writeln!(out, "# problem={}", self.meta.problem).map_err(werr)?;
        writeln!(out, "# schedule={}", self.meta.schedule).map_err(werr)?;
        writeln!(out, "# staleness={}", self.meta.staleness).map_err(werr)?;
        writeln!(out, "# seed={}", self.meta.seed).map_err(werr)?;
        out.flush().map_err(werr)?;

        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
        header.extend(self.aux_names.iter().map(String::as_str));
        w.write_record(&header).map_err(|e| Error::Trace(e.to_string()))?;
        for e in &self.events {
            let mut row = vec![
                e.seq.to_string(),
                fmt_f(e.time),
                e.coord.to_string(),
                fmt_f(e.tau),
                fmt_f(e.g_tilde),
                fmt_f(e.g_fresh),
                fmt_f(e.gamma),
                fmt_f(e.delta_p),
                fmt_f(e.value_before),
                fmt_f(e.value_after),
                fmt_f(e.phi_after),
            ];
            row.extend(e.aux.iter().map(|&x| fmt_f(x)));
            w.write_record(&row).map_err(|e| Error::Trace(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Trace(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Trace(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }

    pub fn load_csv(path: &Path) -> Result<Trace> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Trace::read_csv(f).map_err(|e| match e {
            Error::Trace(reason) => Error::parse(path, reason),
            other => other,
        })
    }

    /// Parses the CSV form written by [`Trace::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Trace> {
        let mut reader = BufReader::new(input);
        let mut meta = TraceMeta::default();
        let mut horizon = None;
        let mut initial = None;
        let mut body = String::new();
        let mut line = String::new();
        loop {
            line.clear();
            let n = reader.read_line(&mut line).map_err(|e| Error::Trace(e.to_string()))?;
            if n == 0 {
                break;
            }
            let Some(rest) = line.strip_prefix('#') else {
                body.push_str(&line);
                reader.read_to_string(&mut body).map_err(|e| Error::Trace(e.to_string()))?;
                break;
            };
            let rest = rest.trim();
            let Some((key, value)) = rest.split_once('=') else { continue };
            match key.trim() {
                "horizon" => horizon = Some(parse_f(value.trim(), "horizon")?),
                "initial" => {
                    let v = value
                        .split_whitespace()
                        .map(|s| parse_f(s, "initial point"))
                        .collect::<Result<Vec<_>>>()?;
                    initial = Some(Point::new(v).map_err(|e| Error::Trace(e.to_string()))?);
                }
                "problem" => meta.problem = value.trim().to_string(),
                "schedule" => meta.schedule = value.trim().to_string(),
                "staleness" => meta.staleness = value.trim().to_string(),
                "seed" => {
                    meta.seed = value.trim().parse().map_err(|_| Error::Trace("bad seed".into()))?
                }
                _ => {}
            }
        }
        let horizon = horizon.ok_or_else(|| Error::Trace("missing horizon metadata".into()))?;
        let initial = initial.ok_or_else(|| Error::Trace("missing initial point metadata".into()))?;

        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let header = rdr.headers().map_err(|e| Error::Trace(e.to_string()))?.clone();
        if header.len() < BASE_COLUMNS.len()
            || header.iter().zip(BASE_COLUMNS.iter()).any(|(a, b)| a != *b)
        {
            return Err(Error::Trace(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
        }
        let aux_names: Vec<String> = header.iter().skip(BASE_COLUMNS.len()).map(String::from).collect();
        let mut events = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Trace(format!("row {row}: {e}")))?;
            if rec.len() != header.len() {
                return Err(Error::Trace(format!("row {row}: expected {} fields", header.len())));
            }
            let f = |i: usize| parse_f(&rec[i], BASE_COLUMNS[i]).map_err(|e| Error::Trace(format!("row {row}: {e}")));
            let idx = |i: usize| {
                rec[i].parse::<usize>().map_err(|_| Error::Trace(format!("row {row}: bad {}", BASE_COLUMNS[i])))
            };
            let coord = idx(2)?;
            if coord >= initial.dim() {
                return Err(Error::Trace(format!("row {row}: coordinate {coord} out of range")));
            }
            let aux = (BASE_COLUMNS.len()..rec.len())
                .map(|i| parse_f(&rec[i], "aux").map_err(|e| Error::Trace(format!("row {row}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            events.push(UpdateEvent {
                seq: idx(0)?,
                time: f(1)?,
                coord,
                tau: f(3)?,
                view: None,
                g_tilde: f(4)?,
                g_fresh: f(5)?,
                gamma: f(6)?,
                delta_p: f(7)?,
                value_before: f(8)?,
                value_after: f(9)?,
                phi_after: f(10)?,
                aux,
            });
        }
        Ok(Trace { initial, events, horizon, meta, aux_names })
    }
}

/// 17 significant digits, enough for a lossless round trip.
pub(crate) fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Trace(format!("cannot parse {what} from {s:?}")))
}

/// Per-coordinate value paths of a trace, for repeated window queries.
#[derive(Debug, Clone)]
pub struct Paths {
    // times[k][q] is the time of the q-th update to k; values[k][0] is the initial value
    // and values[k][q + 1] the value after that update
    times: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    horizon: f64,
}

impl Paths {
    pub fn new(trace: &Trace) -> Self {
        let n = trace.dim();
        let mut times = vec![Vec::new(); n];
        let mut values: Vec<Vec<f64>> = trace.initial.iter().map(|&x| vec![x]).collect();
        for e in &trace.events {
            times[e.coord].push(e.time);
            values[e.coord].push(e.value_after);
        }
        Paths { times, values, horizon: trace.horizon }
    }

    pub fn dim(&self) -> usize {
        self.times.len()
    }

    pub fn update_times(&self, k: usize) -> &[f64] {
        &self.times[k]
    }

    /// Value of coordinate `k` just before time `t`.
    pub fn value_at(&self, k: usize, t: f64) -> f64 {
        self.values[k][self.times[k].partition_point(|&s| s < t)]
    }

    /// Range of values coordinate `k` takes over `[t1, t2]`.
    pub fn range(&self, k: usize, t1: f64, t2: f64) -> (f64, f64) {
        let a = self.times[k].partition_point(|&s| s < t1);
        let b = self.times[k].partition_point(|&s| s < t2);
        self.values[k][a..=b]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// First update to `k` strictly after `t`.
    pub fn next_update(&self, k: usize, t: f64) -> Option<f64> {
        let q = self.times[k].partition_point(|&s| s <= t);
        self.times[k].get(q).copied()
    }

    /// The admissible-view box for coordinate `j` over `[t1, t2]`, pinned at `s_j`.
    pub fn window_box(&self, j: usize, t1: f64, t2: f64, s_j: f64) -> Result<CoordBox> {
        if !(t1 <= t2) {
            return Err(Error::InvalidInput(format!("window [{t1}, {t2}] is empty")));
        }
        if t2 > self.horizon {
            return Err(Error::InvalidInput(format!("window end {t2} beyond horizon {}", self.horizon)));
        }
        let n = self.dim();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for k in 0..n {
            if k != j {
                let (a, b) = self.range(k, t1, t2);
                lo[k] = a;
                hi[k] = b;
            }
        }
        CoordBox::new(lo, hi, j, s_j)
    }
}

/// Convenience wrapper over [`Paths::window_box`] for one-off queries.
pub fn window_box(trace: &Trace, j: usize, t1: f64, t2: f64, s_j: f64) -> Result<CoordBox> {
    Paths::new(trace).window_box(j, t1, t2, s_j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Gap,
    Duplicate,
    Order,
    Tau,
    Staleness,
    Update,
    Replay,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Gap => "gap",
            ViolationKind::Duplicate => "duplicate",
            ViolationKind::Order => "order",
            ViolationKind::Tau => "tau",
            ViolationKind::Staleness => "staleness",
            ViolationKind::Update => "update",
            ViolationKind::Replay => "replay",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Event row, or `None` for trace-level problems.
    pub row: Option<usize>,
    pub kind: ViolationKind,
    pub message: String,
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Lists every timing, staleness, update-rule and replay violation in the trace.
pub fn validate_trace(trace: &Trace) -> Vec<Violation> {
    let n = trace.dim();
    let mut out = Vec::new();
    let mut push = |row: Option<usize>, kind, message: String| out.push(Violation { row, kind, message });
    let mut last = vec![0.0f64; n];
    let mut p = trace.initial.clone();
    let paths = Paths::new(trace);
    let mut prev_time = f64::NEG_INFINITY;
    for (row, e) in trace.events.iter().enumerate() {
        if e.time == prev_time {
            push(Some(row), ViolationKind::Duplicate, format!("time {} repeats", e.time));
        } else if e.time < prev_time {
            push(Some(row), ViolationKind::Order, format!("time {} before {}", e.time, prev_time));
        }
        prev_time = prev_time.max(e.time);
        let j = e.coord;
        if e.tau != last[j] {
            push(Some(row), ViolationKind::Tau, format!("tau {} but previous update at {}", e.tau, last[j]));
        }
        let gap = e.time - last[j];
        if gap > 1.0 {
            push(Some(row), ViolationKind::Gap, format!("coordinate {j} gap {gap} > 1"));
        } else if !(gap > 0.0) {
            push(Some(row), ViolationKind::Order, format!("coordinate {j} non-positive gap {gap}"));
        }
        let expected = -e.g_tilde / e.gamma * e.delta_t();
        if !(e.gamma > 0.0) || !close(expected, e.delta_p, 1e-12) {
            push(
                Some(row),
                ViolationKind::Update,
                format!("delta_p {} but -g/gamma*dt = {}", e.delta_p, expected),
            );
        }
        if !close(p[j], e.value_before, 1e-12) {
            push(
                Some(row),
                ViolationKind::Replay,
                format!("value_before {} but replayed value {}", e.value_before, p[j]),
            );
        }
        if !close(e.value_before + e.delta_p, e.value_after, 1e-12) {
            push(
                Some(row),
                ViolationKind::Replay,
                format!("value_after {} but value_before + delta_p = {}", e.value_after, e.value_before + e.delta_p),
            );
        }
        if let Some(view) = &e.view {
            match paths.window_box(j, e.tau, e.time, e.value_before) {
                Ok(bx) if view.dim() == n && bx.contains(view, 1e-12) => {}
                Ok(bx) => {
                    let worst = (0..n)
                        .map(|k| (bx.lo()[k] - view[k]).max(view[k] - bx.hi()[k]).max(0.0))
                        .fold(0.0, f64::max);
                    push(Some(row), ViolationKind::Staleness, format!("view outside box by {worst:e}"));
                }
                Err(err) => push(Some(row), ViolationKind::Staleness, err.to_string()),
            }
        }
        p[j] = e.value_after;
        last[j] = e.time;
    }
    for (j, &t) in last.iter().enumerate() {
        if trace.horizon - t > 1.0 {
            push(None, ViolationKind::Gap, format!("coordinate {j} idle from {t} to horizon {}", trace.horizon));
        }
    }
    out
}

/// Re-applies every event from the initial point, failing at the first inconsistent row.
pub fn replay(trace: &Trace) -> Result<Point> {
    let mut p = trace.initial.clone();
    let mut last = vec![0.0f64; trace.dim()];
    for (row, e) in trace.events.iter().enumerate() {
        let j = e.coord;
        if e.tau != last[j] {
            return Err(Error::Replay { row, reason: format!("tau {} but previous update at {}", e.tau, last[j]) });
        }
        if !close(p[j], e.value_before, 1e-12) {
            return Err(Error::Replay {
                row,
                reason: format!("value_before {} but replayed value {}", e.value_before, p[j]),
            });
        }
        let expected = -e.g_tilde / e.gamma * e.delta_t();
        if !close(expected, e.delta_p, 1e-12) {
            return Err(Error::Replay { row, reason: format!("delta_p {} but rule gives {}", e.delta_p, expected) });
        }
        let next = p[j] + e.delta_p;
        if !close(next, e.value_after, 1e-12) {
            return Err(Error::Replay { row, reason: format!("value_after {} but replay gives {}", e.value_after, next) });
        }
        p[j] = e.value_after;
        last[j] = e.time;
    }
    Ok(p)
}
