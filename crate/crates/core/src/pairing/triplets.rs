use std::fmt::Write as _;
use std::path::Path;

use super::mrsd::PreferenceTriplet;
use crate::error::{Error, Result};
use crate::prompting::{AxisStats, PromptStats};
use crate::reward::Axis;

const MAGIC: &str = "# mrsd v1";

/// Contents of a triplet file: header fields plus one record per triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletFile {
    pub r: usize,
    pub seed: u64,
    pub stats: Option<PromptStats>,
    pub triplets: Vec<PreferenceTriplet>,
}

impl TripletFile {
    pub fn new(r: usize, seed: u64, triplets: Vec<PreferenceTriplet>) -> Self {
        Self {
            r,
            seed,
            stats: None,
            triplets,
        }
    }

    pub fn with_stats(mut self, stats: PromptStats) -> Self {
        self.stats = Some(stats);
        self
    }

    /// Triplet count per primary axis, in canonical axis order.
    pub fn axis_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for t in &self.triplets {
            counts[t.primary_axis.index()] += 1;
        }
        counts
    }
}

pub fn serialize_triplets(file: &TripletFile) -> String {
    let axes: Vec<&str> = Axis::ALL.iter().map(|a| a.name()).collect();
    let mut out = format!("{MAGIC} R={} axes={} seed={}\n", file.r, axes.join(","), file.seed);
    if let Some(stats) = &file.stats {
        out.push_str("# prompt_stats");
        for a in Axis::ALL {
            let s = stats.axis(a);
            write!(out, " {}={},{}", a.name(), s.min, s.max).unwrap();
        }
        out.push_str("\n# prompt_medians");
        for a in Axis::ALL {
            write!(out, " {}={}", a.name(), stats.axis(a).median).unwrap();
        }
        out.push('\n');
    }
    for t in &file.triplets {
        out.push_str(&serde_json::to_string(t).expect("triplet serialises"));
        out.push('\n');
    }
    out
}

fn header_fields<'a>(line: &'a str, prefix: &str, line_no: usize) -> Result<Vec<(&'a str, &'a str)>> {
    let rest = line
        .strip_prefix(prefix)
        .ok_or_else(|| Error::parse(line_no, format!("expected `{prefix}`")))?;
    rest.split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("malformed header field `{kv}`")))
        })
        .collect()
}

fn num<T: std::str::FromStr>(s: &str, line_no: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(line_no, format!("invalid number `{s}`")))
}

fn axis_values<'a>(fields: &[(&str, &'a str)], line_no: usize) -> Result<[&'a str; 3]> {
    if fields.len() != 3 {
        return Err(Error::parse(line_no, "expected one field per axis"));
    }
    let mut out = [""; 3];
    for (a, (key, value)) in Axis::ALL.into_iter().zip(fields) {
        if *key != a.name() {
            return Err(Error::parse(line_no, format!("expected axis `{}`, found `{key}`", a.name())));
        }
        out[a.index()] = value;
    }
    Ok(out)
}

pub fn parse_triplets(text: &str) -> Result<TripletFile> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
    let mut r = None;
    let mut seed = None;
    for (key, value) in header_fields(header, MAGIC, 1)? {
        match key {
            "R" => r = Some(num(value, 1)?),
            "seed" => seed = Some(num(value, 1)?),
            "axes" if value == "text,quality,semantic" => {}
            "axes" => return Err(Error::parse(1, format!("unsupported axes `{value}`"))),
            _ => return Err(Error::parse(1, format!("unknown header field `{key}`"))),
        }
    }
    let mut file = TripletFile::new(
        r.ok_or_else(|| Error::parse(1, "header lacks R"))?,
        seed.ok_or_else(|| Error::parse(1, "header lacks seed"))?,
        Vec::new(),
    );

    if let Some(&(line_no, line)) = lines.peek() {
        if line.starts_with("# prompt_stats") {
            lines.next();
            let ranges = axis_values(&header_fields(line, "# prompt_stats", line_no)?, line_no)?;
            let (med_no, med_line) = lines
                .next()
                .ok_or_else(|| Error::parse(line_no + 1, "missing prompt_medians line"))?;
            let medians = axis_values(&header_fields(med_line, "# prompt_medians", med_no)?, med_no)?;
            let mut axes = [AxisStats {
                min: 0.0,
                max: 0.0,
                median: 0.0,
            }; 3];
            for i in 0..3 {
                let (lo, hi) = ranges[i]
                    .split_once(',')
                    .ok_or_else(|| Error::parse(line_no, "range must be `min,max`"))?;
                axes[i] = AxisStats {
                    min: num(lo, line_no)?,
                    max: num(hi, line_no)?,
                    median: num(medians[i], med_no)?,
                };
            }
            file.stats = Some(PromptStats { axes });
        }
    }

    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let t: PreferenceTriplet =
            serde_json::from_str(line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        for r in [&t.winner_rewards, &t.loser_rewards] {
            r.validate().map_err(|e| Error::parse(line_no, e.to_string()))?;
        }
        file.triplets.push(t);
    }
    Ok(file)
}

pub fn emit_triplets(file: &TripletFile, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_triplets(file)).map_err(|e| Error::io(path, e))
}

pub fn load_triplets(path: &Path) -> Result<TripletFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_triplets(&text)
}
