//! Delimiter-separated ingestion and export of PV measurements and weather
//! runs. Lines starting with `#` are metadata comments and are skipped.

use chrono::NaiveDateTime;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::types::{PvSeries, WeatherForecastSet, STEP_MINUTES};

use super::PipelineError;

const DATETIME_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

pub(crate) fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    DATETIME_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s.trim(), fmt).ok())
}

pub(crate) fn format_datetime(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, PipelineError> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> PipelineError {
    PipelineError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Loads `timestamp_iso8601,power_kw` rows. The resolution is detected from
/// the first two timestamps and must be uniform throughout.
pub fn load_pv_csv(path: &Path, capacity_kw: f64) -> Result<PvSeries, PipelineError> {
    let mut rdr = reader(path)?;
    let mut times: Vec<NaiveDateTime> = Vec::new();
    let mut power: Vec<f64> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(parse_err(path, i + 2, "expected 2 columns"));
        }
        let t = parse_datetime(&record[0])
            .ok_or_else(|| parse_err(path, i + 2, format!("bad timestamp '{}'", &record[0])))?;
        let p: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(path, i + 2, format!("bad power value '{}'", &record[1])))?;
        times.push(t);
        power.push(p);
    }
    if times.len() < 2 {
        return Err(parse_err(path, 1, "need at least two rows"));
    }
    let step = (times[1] - times[0]).num_minutes();
    if step <= 0 {
        return Err(PipelineError::NonUniformInput(
            "timestamps must strictly increase".into(),
        ));
    }
    for (i, w) in times.windows(2).enumerate() {
        if (w[1] - w[0]).num_minutes() != step {
            return Err(PipelineError::NonUniformInput(format!(
                "spacing changes at row {}",
                i + 2
            )));
        }
    }
    Ok(PvSeries::new(times[0], step as u32, capacity_kw, power)?)
}

pub fn save_pv_csv(
    path: &Path,
    series: &PvSeries,
    meta_lines: &[String],
) -> Result<(), PipelineError> {
    let mut f = std::fs::File::create(path)?;
    for line in meta_lines {
        writeln!(f, "# {line}")?;
    }
    writeln!(f, "timestamp_iso8601,power_kw")?;
    for (i, &p) in series.power().iter().enumerate() {
        writeln!(f, "{},{}", format_datetime(series.timestamp(i)), p)?;
    }
    Ok(())
}

/// Loads `issue_time_iso8601,valid_time_iso8601,irradiance_wm2,temperature_c`
/// rows grouped by issue time. Valid times within a run must advance on the
/// 15-minute grid without gaps.
pub fn load_weather_csv(path: &Path) -> Result<Vec<WeatherForecastSet>, PipelineError> {
    let mut rdr = reader(path)?;
    let mut runs: BTreeMap<NaiveDateTime, Vec<(NaiveDateTime, f64, f64)>> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() < 4 {
            return Err(parse_err(path, i + 2, "expected 4 columns"));
        }
        let issue = parse_datetime(&record[0])
            .ok_or_else(|| parse_err(path, i + 2, format!("bad issue time '{}'", &record[0])))?;
        let valid = parse_datetime(&record[1])
            .ok_or_else(|| parse_err(path, i + 2, format!("bad valid time '{}'", &record[1])))?;
        let irr: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(path, i + 2, format!("bad irradiance '{}'", &record[2])))?;
        let temp: f64 = record[3]
            .parse()
            .map_err(|_| parse_err(path, i + 2, format!("bad temperature '{}'", &record[3])))?;
        runs.entry(issue).or_default().push((valid, irr, temp));
    }
    let mut out = Vec::with_capacity(runs.len());
    for (issue, mut rows) in runs {
        rows.sort_by_key(|r| r.0);
        let mut irr = Vec::with_capacity(rows.len());
        let mut temp = Vec::with_capacity(rows.len());
        for (j, (valid, a, b)) in rows.iter().enumerate() {
            let expected = issue + chrono::TimeDelta::minutes(j as i64 * STEP_MINUTES);
            if *valid != expected {
                return Err(PipelineError::NonUniformInput(format!(
                    "run issued {issue} expects valid time {expected}, found {valid}"
                )));
            }
            irr.push(*a);
            temp.push(*b);
        }
        out.push(WeatherForecastSet::new(issue, irr, temp)?);
    }
    Ok(out)
}

pub fn save_weather_csv(
    path: &Path,
    sets: &[&WeatherForecastSet],
    meta_lines: &[String],
) -> Result<(), PipelineError> {
    let mut f = std::fs::File::create(path)?;
    for line in meta_lines {
        writeln!(f, "# {line}")?;
    }
    writeln!(f, "issue_time_iso8601,valid_time_iso8601,irradiance_wm2,temperature_c")?;
    for set in sets {
        for i in 0..set.horizon_steps() {
            let valid = set.issue_time + chrono::TimeDelta::minutes(i as i64 * STEP_MINUTES);
            writeln!(
                f,
                "{},{},{},{}",
                format_datetime(set.issue_time),
                format_datetime(valid),
                set.irradiance_wm2[i],
                set.temperature_c[i],
            )?;
        }
    }
    Ok(())
}
