//! Flow-record datasets: CSV ingestion, synthesis, and splitting.
//!
//! The on-disk format follows the common intrusion-detection capture layout:
//! one row per network flow with identifier columns (flow id, endpoints,
//! timestamp), a wide block of numeric statistics, and a `Label` column.
//! Headers in the wild are messy — leading spaces, `/` and spaces inside
//! names — so ingestion normalizes every header (see [`normalize_header`])
//! and matches the identifier columns case-insensitively. Non-finite
//! sentinels (`Infinity`, `NaN`) and empty cells are kept as IEEE
//! infinities/NaNs in the parsed values; imputation happens later in the
//! preprocessing stage, not here.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Ordered names of the numeric feature columns shared by every record of a
/// dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSchema {
    pub numeric_names: Vec<String>,
}

/// One parsed network flow.
///
/// Identifier fields are kept separate from the numeric feature vector so
/// downstream stages can choose whether identifiers participate in
/// modelling. Ports and protocol appear both as typed fields and as entries
/// in `values` (they are legitimately numeric).
#[derive(Clone, Debug, PartialEq)]
pub struct FlowRecord {
    /// Schema shared with the owning dataset; `values` aligns with it.
    pub schema: Arc<FeatureSchema>,
    pub flow_id: Option<String>,
    pub source_ip: String,
    pub destination_ip: String,
    pub source_port: Option<u32>,
    pub destination_port: Option<u32>,
    pub protocol: Option<u32>,
    /// Raw timestamp text as found in the input.
    pub timestamp: Option<String>,
    /// Numeric feature values aligned with `schema.numeric_names`; may
    /// contain NaN (missing/unparseable) and infinities (sentinels).
    pub values: Vec<f64>,
    pub label: Option<String>,
}

/// An in-memory set of flow records with a common schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schema: Arc<FeatureSchema>,
    pub records: Vec<FlowRecord>,
    /// Sorted distinct labels present in `records`.
    pub class_names: Vec<String>,
    /// Where the data came from (file path or `synthetic`).
    pub source: String,
}

impl Dataset {
    /// Builds a dataset, deriving `class_names` from the records.
    pub fn from_records(
        schema: Arc<FeatureSchema>,
        records: Vec<FlowRecord>,
        source: impl Into<String>,
    ) -> Self {
        let class_names: Vec<String> = records
            .iter()
            .filter_map(|r| r.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Dataset {
            schema,
            records,
            class_names,
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Header normalization and column roles
// ---------------------------------------------------------------------------

/// Normalizes a raw CSV header: trims whitespace, turns spaces, `/`, `.`,
/// and `-` into `_`, collapses runs of `_`, and strips leading/trailing `_`.
/// Case is preserved (`Flow Packets/s` becomes `Flow_Packets_s`).
pub fn normalize_header(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut last_underscore = false;
    for ch in raw.trim().chars() {
        let mapped = match ch {
            ' ' | '/' | '.' | '-' => '_',
            other => other,
        };
        if mapped == '_' {
            if !last_underscore && !out.is_empty() {
                out.push('_');
            }
            last_underscore = true;
        } else {
            out.push(mapped);
            last_underscore = false;
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum ColumnRole {
    FlowId,
    SourceIp,
    DestinationIp,
    SourcePort,
    DestinationPort,
    Protocol,
    Timestamp,
    Label,
    Numeric,
}

pub(crate) fn column_role(normalized: &str) -> ColumnRole {
    match normalized.to_ascii_lowercase().as_str() {
        "flow_id" => ColumnRole::FlowId,
        "source_ip" | "src_ip" => ColumnRole::SourceIp,
        "destination_ip" | "dst_ip" => ColumnRole::DestinationIp,
        "source_port" | "src_port" => ColumnRole::SourcePort,
        "destination_port" | "dst_port" => ColumnRole::DestinationPort,
        "protocol" => ColumnRole::Protocol,
        "timestamp" => ColumnRole::Timestamp,
        "label" => ColumnRole::Label,
        _ => ColumnRole::Numeric,
    }
}

/// Parses a numeric cell, mapping sentinel spellings to IEEE values: empty
/// or unparseable cells and `NaN` become NaN, `Infinity`/`inf` (optionally
/// signed) become the matching infinity.
pub fn parse_numeric_cell(cell: &str) -> f64 {
    let t = cell.trim();
    if t.is_empty() {
        return f64::NAN;
    }
    match t.to_ascii_lowercase().as_str() {
        "infinity" | "inf" | "+inf" | "+infinity" => f64::INFINITY,
        "-infinity" | "-inf" => f64::NEG_INFINITY,
        "nan" => f64::NAN,
        _ => t.parse::<f64>().unwrap_or(f64::NAN),
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion / writing
// ---------------------------------------------------------------------------

pub(crate) struct ColumnMap {
    flow_id: Option<usize>,
    source_ip: Option<usize>,
    destination_ip: Option<usize>,
    source_port: Option<usize>,
    destination_port: Option<usize>,
    protocol: Option<usize>,
    timestamp: Option<usize>,
    pub(crate) label: Option<usize>,
    /// `(csv column index, normalized name)` in header order; includes the
    /// port/protocol columns.
    pub(crate) numeric: Vec<(usize, String)>,
}

pub(crate) fn map_columns(header: &csv::StringRecord, origin: &str) -> Result<ColumnMap> {
    let mut map = ColumnMap {
        flow_id: None,
        source_ip: None,
        destination_ip: None,
        source_port: None,
        destination_port: None,
        protocol: None,
        timestamp: None,
        label: None,
        numeric: Vec::new(),
    };
    let mut seen_names: BTreeSet<String> = BTreeSet::new();
    for (i, raw) in header.iter().enumerate() {
        let name = normalize_header(raw);
        if name.is_empty() {
            return Err(Error::Schema(format!(
                "{origin}: header column {} is empty",
                i + 1
            )));
        }
        if !seen_names.insert(name.to_ascii_lowercase()) {
            return Err(Error::Schema(format!(
                "{origin}: duplicate column `{name}`"
            )));
        }
        let set = |slot: &mut Option<usize>| {
            *slot = Some(i);
        };
        match column_role(&name) {
            ColumnRole::FlowId => set(&mut map.flow_id),
            ColumnRole::SourceIp => set(&mut map.source_ip),
            ColumnRole::DestinationIp => set(&mut map.destination_ip),
            ColumnRole::Timestamp => set(&mut map.timestamp),
            ColumnRole::Label => set(&mut map.label),
            ColumnRole::SourcePort => {
                set(&mut map.source_port);
                map.numeric.push((i, name));
            }
            ColumnRole::DestinationPort => {
                set(&mut map.destination_port);
                map.numeric.push((i, name));
            }
            ColumnRole::Protocol => {
                set(&mut map.protocol);
                map.numeric.push((i, name));
            }
            ColumnRole::Numeric => map.numeric.push((i, name)),
        }
    }
    Ok(map)
}

fn cell_opt(rec: &csv::StringRecord, idx: Option<usize>) -> Option<String> {
    idx.and_then(|i| rec.get(i))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
}

fn cell_u32(rec: &csv::StringRecord, idx: Option<usize>) -> Option<u32> {
    cell_opt(rec, idx).and_then(|s| s.parse::<u32>().ok())
}

pub(crate) fn record_from_row(
    rec: &csv::StringRecord,
    map: &ColumnMap,
    schema: &Arc<FeatureSchema>,
) -> FlowRecord {
    FlowRecord {
        schema: Arc::clone(schema),
        flow_id: cell_opt(rec, map.flow_id),
        source_ip: cell_opt(rec, map.source_ip).unwrap_or_default(),
        destination_ip: cell_opt(rec, map.destination_ip).unwrap_or_default(),
        source_port: cell_u32(rec, map.source_port),
        destination_port: cell_u32(rec, map.destination_port),
        protocol: cell_u32(rec, map.protocol),
        timestamp: cell_opt(rec, map.timestamp),
        values: map
            .numeric
            .iter()
            .map(|&(i, _)| parse_numeric_cell(rec.get(i).unwrap_or("")))
            .collect(),
        label: cell_opt(rec, map.label),
    }
}

/// Reads a flow CSV into memory.
///
/// The first row must be a header; ragged data rows are rejected with their
/// row number (the header counts as row 1). Cell-level oddities are
/// tolerated: unparseable numerics become NaN and empty identifier cells
/// become `None`/empty.
pub fn read_flows_csv(path: &Path) -> Result<Dataset> {
    let origin = path.to_string_lossy().into_owned();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut rows = reader.records();

    let header = match rows.next() {
        None => return Err(Error::parse(&origin, 1, "missing header row")),
        Some(Err(e)) => return Err(Error::parse(&origin, 1, e.to_string())),
        Some(Ok(h)) => h,
    };
    let map = map_columns(&header, &origin)?;
    let schema = Arc::new(FeatureSchema {
        numeric_names: map.numeric.iter().map(|(_, n)| n.clone()).collect(),
    });

    let mut records = Vec::new();
    for (ridx, row) in rows.enumerate() {
        let row_number = ridx + 2;
        let rec = row.map_err(|e| Error::parse(&origin, row_number, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(Error::parse(
                &origin,
                row_number,
                format!("expected {} columns, found {}", header.len(), rec.len()),
            ));
        }
        records.push(record_from_row(&rec, &map, &schema));
    }
    Ok(Dataset::from_records(schema, records, origin))
}

/// Writes a dataset back to CSV.
///
/// Layout: `Flow_ID, Source_IP, Destination_IP, Timestamp`, then the numeric
/// columns in schema order (ports/protocol live there), then `Label`.
/// Numbers use the shortest round-trippable decimal form, so reading the
/// file back reproduces the records exactly.
pub fn write_flows_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let werr = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));

    let mut header: Vec<String> = vec![
        "Flow_ID".into(),
        "Source_IP".into(),
        "Destination_IP".into(),
        "Timestamp".into(),
    ];
    header.extend(ds.schema.numeric_names.iter().cloned());
    header.push("Label".into());
    w.write_record(&header).map_err(werr)?;

    for r in &ds.records {
        let mut row: Vec<String> = vec![
            r.flow_id.clone().unwrap_or_default(),
            r.source_ip.clone(),
            r.destination_ip.clone(),
            r.timestamp.clone().unwrap_or_default(),
        ];
        row.extend(r.values.iter().map(|v| {
            if v.is_nan() {
                "NaN".to_string()
            } else if *v == f64::INFINITY {
                "Infinity".to_string()
            } else if *v == f64::NEG_INFINITY {
                "-Infinity".to_string()
            } else {
                v.to_string()
            }
        }));
        row.push(r.label.clone().unwrap_or_default());
        w.write_record(&row).map_err(werr)?;
    }
    w.flush()
        .map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Configuration for the synthetic flow generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub rows: usize,
    /// `(label, proportion)` pairs; proportions must sum to 1.
    pub class_mix: Vec<(String, f64)>,
    /// Probability that a row's entire feature identity is drawn from a
    /// different class's profile (label kept), creating class overlap.
    /// 0.0 yields perfectly separable classes.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            rows: 44489,
            class_mix: default_class_mix(),
            noise: 0.0,
            seed: 1,
        }
    }
}

/// The default class mix: a benign-dominated capture day with two small
/// brute-force attack families, matching common enterprise traffic shape.
pub fn default_class_mix() -> Vec<(String, f64)> {
    vec![
        ("BENIGN".into(), 43166.0 / 44489.0),
        ("FTP-Patator".into(), 786.0 / 44489.0),
        ("SSH-Patator".into(), 537.0 / 44489.0),
    ]
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.class_mix.is_empty() {
            return Err(Error::Config("class_mix must not be empty".into()));
        }
        let mut seen = BTreeSet::new();
        for (label, p) in &self.class_mix {
            if !seen.insert(label.clone()) {
                return Err(Error::Config(format!("duplicate class `{label}`")));
            }
            if p.is_nan() || *p < 0.0 {
                return Err(Error::Config(format!(
                    "proportion for `{label}` must be non-negative, got {p}"
                )));
            }
        }
        let total: f64 = self.class_mix.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "class proportions must sum to 1, got {total}"
            )));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config(format!(
                "noise must lie in [0, 1], got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

/// Exact per-class row counts via largest-remainder apportionment, so the
/// counts always sum to `rows` and track the proportions as closely as
/// integers allow.
pub fn class_counts(spec: &SynthSpec) -> Result<Vec<(String, usize)>> {
    spec.validate()?;
    let quotas: Vec<f64> = spec
        .class_mix
        .iter()
        .map(|(_, p)| p * spec.rows as f64)
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut by_remainder: Vec<(f64, usize)> = quotas
        .iter()
        .enumerate()
        .map(|(i, q)| (q - q.floor(), i))
        .collect();
    // Largest remainder first; ties resolved by class order for determinism.
    by_remainder.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for k in 0..(spec.rows - assigned) {
        counts[by_remainder[k % by_remainder.len()].1] += 1;
    }
    Ok(spec
        .class_mix
        .iter()
        .map(|(label, _)| label.clone())
        .zip(counts)
        .collect())
}

/// Numeric columns emitted by the generator, in order. Ports and protocol
/// double as identifier fields, like in real captures.
pub const SYNTH_NUMERIC_COLUMNS: [&str; 18] = [
    "Source_Port",
    "Destination_Port",
    "Protocol",
    "Flow_Duration",
    "Total_Fwd_Packets",
    "Total_Backward_Packets",
    "Total_Length_of_Fwd_Packets",
    "Total_Length_of_Bwd_Packets",
    "Fwd_Packet_Length_Mean",
    "Bwd_Packet_Length_Mean",
    "Flow_Bytes_s",
    "Flow_Packets_s",
    "Flow_IAT_Mean",
    "Fwd_IAT_Mean",
    "Bwd_IAT_Mean",
    "min_seg_size_forward",
    "Active_Mean",
    "Idle_Mean",
];

/// Gaussian profile of the 15 behavioural columns (everything after
/// protocol), per class.
struct ClassProfile {
    source_ips: &'static [&'static str],
    destination_ips: &'static [&'static str],
    /// Candidate service ports.
    dest_ports: &'static [u32],
    /// Seconds-of-day window for timestamps.
    time_window: (u32, u32),
    /// `(mean, stddev)` per behavioural column.
    behaviour: [(f64, f64); 15],
}

const BENIGN_PROFILE: ClassProfile = ClassProfile {
    source_ips: &[
        "192.168.10.5",
        "192.168.10.8",
        "192.168.10.9",
        "192.168.10.12",
        "192.168.10.14",
        "192.168.10.15",
        "192.168.10.17",
        "192.168.10.19",
    ],
    destination_ips: &[
        "104.16.28.216",
        "172.217.3.110",
        "151.101.0.223",
        "192.168.10.3",
        "23.63.254.163",
    ],
    dest_ports: &[80, 443, 53, 8080, 25],
    time_window: (8 * 3600, 17 * 3600),
    behaviour: [
        (5.0e6, 8.0e5),       // Flow_Duration
        (42.0, 9.0),          // Total_Fwd_Packets
        (38.0, 8.0),          // Total_Backward_Packets
        (21000.0, 4000.0),    // Total_Length_of_Fwd_Packets
        (52000.0, 9000.0),    // Total_Length_of_Bwd_Packets
        (500.0, 90.0),        // Fwd_Packet_Length_Mean
        (1370.0, 160.0),      // Bwd_Packet_Length_Mean
        (14600.0, 2500.0),    // Flow_Bytes_s
        (16.0, 3.0),          // Flow_Packets_s
        (62500.0, 11000.0),   // Flow_IAT_Mean
        (120000.0, 20000.0),  // Fwd_IAT_Mean
        (131000.0, 21000.0),  // Bwd_IAT_Mean
        (32.0, 1.5),          // min_seg_size_forward
        (80000.0, 15000.0),   // Active_Mean
        (900000.0, 140000.0), // Idle_Mean
    ],
};

const FTP_PROFILE: ClassProfile = ClassProfile {
    source_ips: &["172.16.0.1"],
    destination_ips: &["192.168.10.50"],
    dest_ports: &[21],
    time_window: (9 * 3600 + 20 * 60, 10 * 3600 + 20 * 60),
    behaviour: [
        (4.1e4, 6.0e3),    // Flow_Duration: short login bursts
        (9.0, 2.0),        // Total_Fwd_Packets
        (7.0, 1.6),        // Total_Backward_Packets
        (110.0, 22.0),     // Total_Length_of_Fwd_Packets: tiny commands
        (340.0, 55.0),     // Total_Length_of_Bwd_Packets
        (13.0, 2.8),       // Fwd_Packet_Length_Mean
        (47.0, 8.0),       // Bwd_Packet_Length_Mean
        (10900.0, 1700.0), // Flow_Bytes_s
        (390.0, 45.0),     // Flow_Packets_s: rapid-fire attempts
        (2600.0, 420.0),   // Flow_IAT_Mean
        (5100.0, 800.0),   // Fwd_IAT_Mean
        (5400.0, 830.0),   // Bwd_IAT_Mean
        (20.0, 1.0),       // min_seg_size_forward
        (9000.0, 1500.0),  // Active_Mean
        (30000.0, 5200.0), // Idle_Mean
    ],
};

const SSH_PROFILE: ClassProfile = ClassProfile {
    source_ips: &["172.16.0.11"],
    destination_ips: &["192.168.10.50"],
    dest_ports: &[22],
    time_window: (14 * 3600, 15 * 3600),
    behaviour: [
        (2.3e5, 3.2e4),     // Flow_Duration: full key exchange per attempt
        (18.0, 3.5),        // Total_Fwd_Packets
        (16.0, 3.0),        // Total_Backward_Packets
        (1900.0, 300.0),    // Total_Length_of_Fwd_Packets
        (2600.0, 380.0),    // Total_Length_of_Bwd_Packets
        (105.0, 16.0),      // Fwd_Packet_Length_Mean
        (160.0, 24.0),      // Bwd_Packet_Length_Mean
        (19500.0, 2900.0),  // Flow_Bytes_s
        (148.0, 21.0),      // Flow_Packets_s
        (6800.0, 980.0),    // Flow_IAT_Mean
        (13000.0, 1900.0),  // Fwd_IAT_Mean
        (14000.0, 2000.0),  // Bwd_IAT_Mean
        (24.0, 1.0),        // min_seg_size_forward
        (21000.0, 3300.0),  // Active_Mean
        (95000.0, 15000.0), // Idle_Mean
    ],
};

fn profile_for(label: &str) -> &'static ClassProfile {
    match label {
        "BENIGN" => &BENIGN_PROFILE,
        "FTP-Patator" => &FTP_PROFILE,
        "SSH-Patator" => &SSH_PROFILE,
        // Unknown classes reuse the benign shape; they are still labelled
        // distinctly, which is enough for pipeline-level tests.
        _ => &BENIGN_PROFILE,
    }
}

/// One standard-normal draw via Box–Muller (two uniform draws).
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

/// Generates a labelled synthetic dataset.
///
/// Classes follow fixed behavioural profiles (service ports, endpoint
/// pools, time-of-day windows, and Gaussian traffic statistics) that are
/// pairwise well separated, so `noise = 0` yields a perfectly separable
/// problem. With `noise > 0`, each row swaps its entire feature identity for
/// another class's profile with that probability while keeping its label,
/// which caps achievable accuracy below 1.
pub fn synthesize(spec: &SynthSpec) -> Result<Dataset> {
    let counts = class_counts(spec)?;
    let schema = Arc::new(FeatureSchema {
        numeric_names: SYNTH_NUMERIC_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .collect(),
    });
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels: Vec<&str> = spec.class_mix.iter().map(|(l, _)| l.as_str()).collect();

    let mut records: Vec<FlowRecord> = Vec::with_capacity(spec.rows);
    for (label, count) in &counts {
        for _ in 0..*count {
            // Decide whose feature identity this row wears.
            let mimic: &str =
                if spec.noise > 0.0 && labels.len() > 1 && rng.random::<f64>() < spec.noise {
                    let others: Vec<&&str> =
                        labels.iter().filter(|l| **l != label.as_str()).collect();
                    others[rng.random_range(0..others.len())]
                } else {
                    label.as_str()
                };
            let profile = profile_for(mimic);

            let source_ip = pick(&mut rng, profile.source_ips).to_string();
            let destination_ip = pick(&mut rng, profile.destination_ips).to_string();
            let source_port = rng.random_range(49152..=65535u32);
            let destination_port = *pick(&mut rng, profile.dest_ports);
            let protocol: u32 = if destination_port == 53 { 17 } else { 6 };
            let second = rng.random_range(profile.time_window.0..profile.time_window.1);
            let timestamp = format!(
                "4/7/2017 {:02}:{:02}:{:02}",
                second / 3600,
                (second % 3600) / 60,
                second % 60
            );

            let mut values = Vec::with_capacity(SYNTH_NUMERIC_COLUMNS.len());
            values.push(f64::from(source_port));
            values.push(f64::from(destination_port));
            values.push(f64::from(protocol));
            for (mean, std) in profile.behaviour {
                values.push((mean + std * normal(&mut rng)).max(0.0));
            }

            records.push(FlowRecord {
                schema: Arc::clone(&schema),
                flow_id: None, // assigned after shuffling
                source_ip,
                destination_ip,
                source_port: Some(source_port),
                destination_port: Some(destination_port),
                protocol: Some(protocol),
                timestamp: Some(timestamp),
                values,
                label: Some(label.clone()),
            });
        }
    }

    records.shuffle(&mut rng);
    for (i, r) in records.iter_mut().enumerate() {
        r.flow_id = Some(format!("synth-{:06}", i + 1));
    }
    Ok(Dataset::from_records(schema, records, "synthetic"))
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Splits a dataset into `(train, test)` deterministically for a seed.
///
/// `test_fraction` must lie strictly between 0 and 1. The test side gets
/// `round(fraction * n)` records (clamped so both sides stay non-empty).
/// With `stratified`, the same rule applies within each class — every class
/// must then have at least two records and every record must be labelled.
/// Record order within each side follows the original dataset order.
pub fn split(
    ds: &Dataset,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie strictly between 0 and 1, got {test_fraction}"
        )));
    }
    let n = ds.records.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "need at least 2 records to split, got {n}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; n];
    let take = |count: usize, fraction: f64| -> usize {
        ((fraction * count as f64).round() as usize).clamp(1, count - 1)
    };

    if stratified {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in ds.records.iter().enumerate() {
            match &r.label {
                Some(label) => groups.entry(label.as_str()).or_default().push(i),
                None => {
                    return Err(Error::Schema(
                        "stratified split requires every record to be labelled".into(),
                    ))
                }
            }
        }
        for (label, indices) in &mut groups {
            if indices.len() < 2 {
                return Err(Error::Config(format!(
                    "class `{label}` has {} record(s); stratified split needs at least 2",
                    indices.len()
                )));
            }
            indices.shuffle(&mut rng);
            let test_count = take(indices.len(), test_fraction);
            for &i in indices.iter().take(test_count) {
                in_test[i] = true;
            }
        }
    } else {
        let mut indices: Vec<usize> = (0..n).collect();
        indices.shuffle(&mut rng);
        let test_count = take(n, test_fraction);
        for &i in indices.iter().take(test_count) {
            in_test[i] = true;
        }
    }

    let side = |want_test: bool| -> Dataset {
        let records: Vec<FlowRecord> = ds
            .records
            .iter()
            .enumerate()
            .filter(|(i, _)| in_test[*i] == want_test)
            .map(|(_, r)| r.clone())
            .collect();
        Dataset::from_records(Arc::clone(&ds.schema), records, ds.source.clone())
    };
    Ok((side(false), side(true)))
}
