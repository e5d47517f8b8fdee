//! File-based analysis pipeline: one directory of artifacts per subcommand,
//! each with a manifest of input and output digests.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bowtie::{classify_bowtie, distance_profile, Component};
use crate::community::{community_report, detect_communities, CommunityOptions};
use crate::geonmf::{
    bin_transfers, d_sweep, factorize, haversine_km, similarity_matrix, summarize, GeoGrid,
    NmfOptions,
};
use crate::hodge::{
    assemble_problem, decompose, gwcc_nodes, potential_histograms, potential_vs_net,
    potentials_tsv, solve_potentials, HodgeError, SolverOptions,
};
use crate::ingest::{self, Coord, FilterPolicy, ParseMode};
use crate::network::{
    ccdf, degree_correlation, degree_stats, loglog_tail_slope, net_flow_per_node, pearson, summary,
    FlowNetwork, WeightKind,
};
use crate::svg;
use crate::synth::{self, ScenarioSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const HISTOGRAM_BINS: usize = 100;
/// Largest `V` written in dense text form; bigger ones go to a triplet file.
const DENSE_EXPORT_LIMIT: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Synth,
    Ingest,
    Stats,
    Bowtie,
    Hodge,
    Communities,
    Nmf,
    Report,
}

impl Subcommand {
    /// Analysis order of a full run.
    pub const ALL: [Subcommand; 8] = [
        Subcommand::Synth,
        Subcommand::Ingest,
        Subcommand::Stats,
        Subcommand::Bowtie,
        Subcommand::Hodge,
        Subcommand::Communities,
        Subcommand::Nmf,
        Subcommand::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::Synth => "synth",
            Subcommand::Ingest => "ingest",
            Subcommand::Stats => "stats",
            Subcommand::Bowtie => "bowtie",
            Subcommand::Hodge => "hodge",
            Subcommand::Communities => "communities",
            Subcommand::Nmf => "nmf",
            Subcommand::Report => "report",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Walnut proportions with six cities.
    #[default]
    Default,
    Walnut,
    Cities,
    Blocks,
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(Scenario::Default),
            "walnut" => Ok(Scenario::Walnut),
            "cities" => Ok(Scenario::Cities),
            "blocks" => Ok(Scenario::Blocks),
            _ => Err(format!(
                "unknown scenario `{s}` (expected default, walnut, cities or blocks)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(skip)]
    pub input: Option<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
    pub policy: FilterPolicy,
    pub strict: bool,
    pub weight: WeightKind,
    pub tol: f64,
    pub seed: u64,
    pub trials: usize,
    pub grid_k: usize,
    /// `[lat_min, lat_max, lon_min, lon_max]`; derived from the data if absent.
    pub grid_bounds: Option<[f64; 4]>,
    pub nmf_d: usize,
    pub nmf_d_range: Option<(usize, usize)>,
    pub nmf_max_iter: usize,
    pub nmf_tol: f64,
    pub radius_km: f64,
    pub nodes: usize,
    pub scenario: Scenario,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            out: PathBuf::from("out"),
            policy: FilterPolicy::default(),
            strict: false,
            weight: WeightKind::Frequency,
            tol: SolverOptions::default().tolerance,
            seed: 1,
            trials: 10,
            grid_k: 100,
            grid_bounds: None,
            nmf_d: 10,
            nmf_d_range: None,
            nmf_max_iter: 5000,
            nmf_tol: 1e-8,
            radius_km: 10.0,
            nodes: 10_000,
            scenario: Scenario::Default,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "--{}: {}", self.field, self.message)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, field: &'static str, message: &str| {
            if !ok {
                errs.push(FieldError {
                    field,
                    message: message.to_string(),
                });
            }
        };
        check(
            self.tol > 0.0 && self.tol < 1.0,
            "tol",
            "must lie in (0, 1)",
        );
        check(self.trials >= 1, "trials", "must be at least 1");
        check(
            self.grid_k >= 1 && self.grid_k <= 1000,
            "grid-k",
            "must lie in [1, 1000]",
        );
        check(self.nmf_d >= 1, "nmf-d", "must be at least 1");
        if let Some((a, b)) = self.nmf_d_range {
            check(
                a >= 1 && a <= b,
                "nmf-d-range",
                "expected MIN:MAX with 1 <= MIN <= MAX",
            );
        }
        check(self.nmf_max_iter >= 1, "nmf-max-iter", "must be at least 1");
        check(self.nmf_tol >= 0.0, "nmf-tol", "must be non-negative");
        check(
            self.radius_km > 0.0 && self.radius_km.is_finite(),
            "radius-km",
            "must be positive",
        );
        check(self.nodes >= 2, "nodes", "must be at least 2");
        if let Some([a, b, c, d]) = self.grid_bounds {
            check(
                b > a && d > c,
                "grid-bounds",
                "expected LAT_MIN,LAT_MAX,LON_MIN,LON_MAX with min < max",
            );
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Config(errs))
        }
    }

    fn hash(&self) -> String {
        hex::encode(Sha256::digest(
            serde_json::to_vec(self).expect("config serializes"),
        ))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Config(Vec<FieldError>),
    #[error("`{subcommand}` needs the output of `{required}` ({path}); run `{required}` first")]
    MissingArtifact {
        subcommand: Subcommand,
        required: Subcommand,
        path: PathBuf,
    },
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("solver did not converge: {0}")]
    NotConverged(String),
}

impl PipelineError {
    /// 1 usage, 2 data, 3 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::MissingArtifact { .. } => 1,
            PipelineError::Data(_) | PipelineError::Io { .. } => 2,
            PipelineError::NotConverged(_) => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn data<E: fmt::Display>(e: E) -> PipelineError {
    PipelineError::Data(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    fn of(path: String, contents: &[u8]) -> Self {
        Self {
            path,
            sha256: hex::encode(Sha256::digest(contents)),
            bytes: contents.len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: Subcommand,
    pub version: String,
    pub config_hash: String,
    pub config: Value,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
}

/// Writes artifacts of one subcommand and records their digests.
struct Stage<'a> {
    cfg: &'a RunConfig,
    name: Subcommand,
    dir: PathBuf,
    inputs: Vec<FileDigest>,
    artifacts: Vec<FileDigest>,
}

impl<'a> Stage<'a> {
    fn new(cfg: &'a RunConfig, name: Subcommand) -> Result<Self, PipelineError> {
        let dir = cfg.out.join(name.as_str());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self {
            cfg,
            name,
            dir,
            inputs: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, contents.as_ref()).map_err(io_err(&path))?;
        self.artifacts.push(FileDigest::of(
            format!("{}/{rel}", self.name),
            contents.as_ref(),
        ));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(value).map_err(data)?;
        text.push('\n');
        self.write(rel, text)
    }

    /// Reads an artifact of an earlier subcommand.
    fn upstream(&mut self, from: Subcommand, rel: &str) -> Result<Vec<u8>, PipelineError> {
        let path = self.cfg.out.join(from.as_str()).join(rel);
        if !path.exists() {
            return Err(PipelineError::MissingArtifact {
                subcommand: self.name,
                required: from,
                path,
            });
        }
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        self.inputs
            .push(FileDigest::of(format!("{from}/{rel}"), &bytes));
        Ok(bytes)
    }

    fn external(&mut self, path: &Path) -> Result<Vec<u8>, PipelineError> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        let name = path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        self.inputs.push(FileDigest::of(name, &bytes));
        Ok(bytes)
    }

    fn finish(self) -> Result<Manifest, PipelineError> {
        let manifest = Manifest {
            subcommand: self.name,
            version: VERSION.to_string(),
            config_hash: self.cfg.hash(),
            config: serde_json::to_value(self.cfg).map_err(data)?,
            inputs: self.inputs,
            artifacts: self.artifacts,
        };
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).map_err(data)?;
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(manifest)
    }
}

/// Runs one subcommand; artifacts land in `<out>/<subcommand>/`.
pub fn run_subcommand(name: Subcommand, cfg: &RunConfig) -> Result<Manifest, PipelineError> {
    cfg.validate()?;
    let mut stage = Stage::new(cfg, name)?;
    match name {
        Subcommand::Synth => run_synth(&mut stage)?,
        Subcommand::Ingest => run_ingest(&mut stage)?,
        Subcommand::Stats => run_stats(&mut stage)?,
        Subcommand::Bowtie => run_bowtie(&mut stage)?,
        Subcommand::Hodge => run_hodge(&mut stage)?,
        Subcommand::Communities => run_communities(&mut stage)?,
        Subcommand::Nmf => run_nmf(&mut stage)?,
        Subcommand::Report => run_report(&mut stage)?,
    }
    stage.finish()
}

/// Runs `synth` (unless an input log is given) and every analysis after it.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<Manifest>, PipelineError> {
    Subcommand::ALL
        .into_iter()
        .filter(|&s| s != Subcommand::Synth || cfg.input.is_none())
        .map(|s| run_subcommand(s, cfg))
        .collect()
}

pub fn scenario_spec(cfg: &RunConfig) -> ScenarioSpec {
    match cfg.scenario {
        Scenario::Default => ScenarioSpec {
            nodes: cfg.nodes,
            seed: cfg.seed,
            ..ScenarioSpec::default()
        },
        Scenario::Walnut => ScenarioSpec::walnut(cfg.nodes, cfg.seed),
        Scenario::Cities => ScenarioSpec::cities(cfg.nodes, true, cfg.seed),
        Scenario::Blocks => ScenarioSpec::blocks(cfg.nodes, 4, 1, cfg.seed),
    }
}

fn run_synth(st: &mut Stage) -> Result<(), PipelineError> {
    let spec = scenario_spec(st.cfg);
    let generated = synth::generate(&spec).map_err(|e| match e {
        synth::SynthError::Invalid(m) => PipelineError::Config(vec![FieldError {
            field: "nodes",
            message: m,
        }]),
        e => data(e),
    })?;
    let mut log = Vec::new();
    ingest::write_log(&mut log, &generated.records).map_err(data)?;
    st.write("transfers.csv", log)?;
    st.write("ground_truth.json", generated.truth.to_json() + "\n")
}

fn run_ingest(st: &mut Stage) -> Result<(), PipelineError> {
    let bytes = match &st.cfg.input {
        Some(p) => st.external(&p.clone())?,
        None => st.upstream(Subcommand::Synth, "transfers.csv")?,
    };
    let mode = if st.cfg.strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    };
    let parsed = ingest::parse_log(bytes.as_slice(), mode).map_err(data)?;
    let read = parsed.records.len();
    let kept = ingest::filter_records(parsed.records, &st.cfg.policy);
    let links = ingest::aggregate(&kept);
    let net = FlowNetwork::build(&links).map_err(data)?;
    let mut buf = Vec::new();
    ingest::write_links(&mut buf, &links).map_err(data)?;
    st.write("links.csv", buf)?;
    let mut coords = String::from("account_id,lat,lon\n");
    for (id, c) in ingest::account_coordinates(&kept) {
        coords.push_str(&format!("{id},{:.6},{:.6}\n", c.lat, c.lon));
    }
    st.write("coordinates.csv", coords)?;
    let mut rejected = String::from("line\treason\n");
    for d in &parsed.rejected {
        rejected.push_str(&format!("{}\t{}\n", d.line, d.reason));
    }
    st.write("rejected.tsv", rejected)?;
    st.write_json(
        "summary.json",
        &json!({
            "records_parsed": read,
            "lines_rejected": parsed.rejected.len(),
            "records_filtered_out": read - kept.len(),
            "records_kept": kept.len(),
            "total_amount_yen": kept.iter().map(|r| r.amount as u128).sum::<u128>().to_string(),
            "accounts": net.node_count(),
            "links": net.link_count(),
        }),
    )
}

fn load_network(st: &mut Stage) -> Result<FlowNetwork, PipelineError> {
    let bytes = st.upstream(Subcommand::Ingest, "links.csv")?;
    let links = ingest::read_links(bytes.as_slice()).map_err(data)?;
    let net = FlowNetwork::build(&links).map_err(data)?;
    if net.is_empty() {
        return Err(PipelineError::Data("network has no links".into()));
    }
    Ok(net)
}

fn load_coordinates(st: &mut Stage) -> Result<BTreeMap<String, Coord>, PipelineError> {
    let bytes = st.upstream(Subcommand::Ingest, "coordinates.csv")?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(data)?;
        let num = |i: usize| -> Result<f64, PipelineError> {
            row.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| data(format!("bad coordinate row {row:?}")))
        };
        out.insert(
            row.get(0).unwrap_or_default().to_string(),
            Coord::new(num(1)?, num(2)?),
        );
    }
    Ok(out)
}

fn run_stats(st: &mut Stage) -> Result<(), PipelineError> {
    let net = load_network(st)?;
    let degs = degree_stats(&net);
    let flows: Vec<f64> = net.links().iter().map(|l| l.flow as f64).collect();
    let freqs: Vec<f64> = net.links().iter().map(|l| l.frequency as f64).collect();
    let ins: Vec<f64> = degs.iter().map(|d| d.in_degree as f64).collect();
    let outs: Vec<f64> = degs.iter().map(|d| d.out_degree as f64).collect();
    let mut tails = BTreeMap::new();
    for (name, values) in [
        ("in_degree", &ins),
        ("out_degree", &outs),
        ("flow", &flows),
        ("frequency", &freqs),
    ] {
        let c = ccdf(values).map_err(data)?;
        st.write(&format!("ccdf_{name}.tsv"), c.to_tsv())?;
        tails.insert(name, loglog_tail_slope(&c, 10.0, 1e-4));
    }
    let corr = degree_correlation(&net);
    let summary_json = json!({
        "accounts": net.node_count(),
        "links": net.link_count(),
        "total_flow_yen": net.links().iter().map(|l| l.flow as u128).sum::<u128>().to_string(),
        "total_transfers": net.links().iter().map(|l| l.frequency).sum::<u64>(),
        "flow": summary(&flows).map_err(data)?,
        "frequency": summary(&freqs).map_err(data)?,
        "in_degree": summary(&ins).map_err(data)?,
        "out_degree": summary(&outs).map_err(data)?,
        "degree_correlation": corr,
        "flow_frequency_pearson": pearson(&flows, &freqs),
        "ccdf_tail_slopes": tails,
    });
    st.write_json("summary.json", &summary_json)?;
    let nf = net_flow_per_node(&net);
    let mut t = String::from("node_id\tin_degree\tout_degree\tnet_degree\tnet_flow\n");
    for (v, d) in degs.iter().enumerate() {
        t.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            net.id(v as u32),
            d.in_degree,
            d.out_degree,
            d.net_degree,
            nf[v]
        ));
    }
    st.write("degrees.tsv", t)
}

fn run_bowtie(st: &mut Stage) -> Result<(), PipelineError> {
    let net = load_network(st)?;
    let part = classify_bowtie(&net).map_err(data)?;
    st.write("partition.tsv", part.to_tsv(&net))?;
    let comps: BTreeMap<&str, Value> = Component::BOWTIE
        .iter()
        .map(|&c| {
            (
                c.as_str(),
                json!({"accounts": part.sizes.get(c), "fraction": part.fraction(c)}),
            )
        })
        .collect();
    st.write_json(
        "summary.json",
        &json!({
            "accounts": net.node_count(),
            "gwcc": part.gwcc_size,
            "outside_gwcc": net.node_count() - part.gwcc_size,
            "components": comps,
        }),
    )?;
    st.write_json("distances.json", &distance_profile(&net, &part))
}

fn run_hodge(st: &mut Stage) -> Result<(), PipelineError> {
    let net = load_network(st)?;
    let opts = SolverOptions {
        tolerance: st.cfg.tol,
        ..SolverOptions::default()
    };
    let to_pipeline = |e: HodgeError| match e {
        e @ HodgeError::NotConverged { .. } => PipelineError::NotConverged(e.to_string()),
        e => data(e),
    };
    let problem = assemble_problem(&net, st.cfg.weight).map_err(to_pipeline)?;
    let pot = solve_potentials(&problem, &opts).map_err(to_pipeline)?;
    let dec = decompose(&problem, &pot.phi);
    let part = classify_bowtie(&net).map_err(data)?;
    let phi = &pot.phi;
    st.write("potentials.tsv", potentials_tsv(&net, phi, Some(&part)))?;
    st.write("decomposition.tsv", dec.to_link_tsv(&net))?;
    let hist = potential_histograms(phi, &part, HISTOGRAM_BINS);
    st.write_json("histograms.json", &hist)?;
    let gwcc = gwcc_nodes(&net);
    let pvn = potential_vs_net(phi, &net, Some(&gwcc));
    let div = dec.circular_divergence();
    let max_div = div.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    st.write_json(
        "summary.json",
        &json!({
            "weight": st.cfg.weight,
            "iterations": pot.iterations,
            "relative_residual": pot.residual,
            "max_circular_divergence": max_div,
            "phi_min": phi.iter().copied().fold(f64::INFINITY, f64::min),
            "phi_max": phi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "component_means": hist.means,
            "pearson_phi_net_degree": pvn.degree_pearson,
            "pearson_phi_net_flow": pvn.flow_pearson,
        }),
    )
}

fn run_communities(st: &mut Stage) -> Result<(), PipelineError> {
    let net = load_network(st)?;
    let opts = CommunityOptions {
        seed: st.cfg.seed,
        trials: st.cfg.trials,
        weight: st.cfg.weight,
        ..CommunityOptions::default()
    };
    let tree = detect_communities(&net, &opts);
    st.write_json("tree.json", &tree.to_nested_json(&net))?;
    st.write("membership.tsv", tree.to_flat_tsv(&net))?;
    let report = community_report(&tree);
    st.write_json(
        "report.json",
        &json!({
            "codelength": tree.codelength,
            "one_level_codelength": tree.one_level_codelength,
            "top_codelength": tree.top_codelength,
            "levels": report.levels,
            "size_rank": report.size_rank,
        }),
    )
}

/// Smallest square (in km) around the coordinates' bounding box.
fn bounding_grid(coords: &BTreeMap<String, Coord>, k: usize) -> Result<GeoGrid, PipelineError> {
    let (mut lat0, mut lat1, mut lon0, mut lon1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for c in coords.values() {
        lat0 = lat0.min(c.lat);
        lat1 = lat1.max(c.lat);
        lon0 = lon0.min(c.lon);
        lon1 = lon1.max(c.lon);
    }
    if !lat0.is_finite() {
        return Err(PipelineError::Data("no account coordinates to grid".into()));
    }
    let center = Coord::new((lat0 + lat1) / 2.0, (lon0 + lon1) / 2.0);
    let ns = haversine_km(Coord::new(lat0, center.lon), Coord::new(lat1, center.lon));
    let ew = haversine_km(Coord::new(center.lat, lon0), Coord::new(center.lat, lon1));
    let side = ns.max(ew).max(1.0) * 1.02;
    GeoGrid::square_around(center, side, k).map_err(data)
}

fn grid_tsv(grid: &GeoGrid, v: &[f64]) -> String {
    // northernmost row first so the file reads like a map
    let mut s = String::new();
    for q in (0..grid.k).rev() {
        let row: Vec<String> = (0..grid.k)
            .map(|p| format!("{}", v[grid.index(p, q)]))
            .collect();
        s.push_str(&row.join("\t"));
        s.push('\n');
    }
    s
}

fn run_nmf(st: &mut Stage) -> Result<(), PipelineError> {
    let bytes = st.upstream(Subcommand::Ingest, "links.csv")?;
    let links = ingest::read_links(bytes.as_slice()).map_err(data)?;
    let coords = load_coordinates(st)?;
    let cfg = st.cfg;
    let grid = match cfg.grid_bounds {
        Some([a, b, c, d]) => GeoGrid::new(a, b, c, d, cfg.grid_k).map_err(data)?,
        None => bounding_grid(&coords, cfg.grid_k)?,
    };
    let binned = bin_transfers(&links, &coords, &grid);
    let v = binned.log_matrix();
    if v.rows * v.cols <= DENSE_EXPORT_LIMIT {
        let mut buf = Vec::new();
        v.to_dense().write_text(&mut buf).map_err(data)?;
        st.write("V.txt", buf)?;
    } else {
        let mut buf = Vec::new();
        v.write_coo(&mut buf).map_err(data)?;
        st.write("V.coo.txt", buf)?;
    }
    st.write_json(
        "binning.json",
        &json!({
            "grid": grid,
            "cells": grid.cells(),
            "nonzero_entries": v.nnz(),
            "total_frequency_in_bounds": binned.total_frequency(),
            "links_out_of_bounds": binned.out_of_bounds,
            "links_missing_coordinates": binned.missing_coordinates,
        }),
    )?;
    let base = NmfOptions {
        rank: cfg.nmf_d,
        max_iterations: cfg.nmf_max_iter,
        tolerance: cfg.nmf_tol,
        seed: cfg.seed,
    };
    let r = factorize(&v, &base).map_err(data)?;
    for (name, m) in [("W.txt", &r.w), ("H.txt", &r.h)] {
        let mut buf = Vec::new();
        m.write_text(&mut buf).map_err(data)?;
        st.write(name, buf)?;
    }
    let summary = summarize(&r, &grid, cfg.radius_km);
    st.write_json(
        "localization.json",
        &json!({
            "radius_km": cfg.radius_km,
            "objective": r.objective(),
            "iterations": r.iterations,
            "converged": r.converged,
            "summary": summary,
        }),
    )?;
    st.write_json("similarity.json", &similarity_matrix(&r))?;
    st.write_json("objective_trace.json", &r.objective_trace)?;
    for k in 0..r.rank() {
        st.write(
            &format!("heatmaps/source_{}.tsv", k + 1),
            grid_tsv(&grid, &r.source_profile(k)),
        )?;
        st.write(
            &format!("heatmaps/destination_{}.tsv", k + 1),
            grid_tsv(&grid, &r.destination_profile(k)),
        )?;
    }
    if let Some((a, b)) = cfg.nmf_d_range {
        let rows: Vec<Value> = d_sweep(&v, &grid, a..=b, &base, cfg.radius_km)
            .map_err(data)?
            .into_iter()
            .map(|(_, s)| {
                json!({
                    "d": s.rank,
                    "objective": s.objective,
                    "localized_pairs": s.localized_pairs,
                    "scattered_destinations": s.scattered_destinations,
                    "source_gamma": s.factors.iter().map(|f| f.source.map(|l| l.gamma)).collect::<Vec<_>>(),
                    "destination_gamma": s.factors.iter().map(|f| f.destination.map(|l| l.gamma)).collect::<Vec<_>>(),
                    "diagonal_similarity": s.factors.iter().map(|f| f.self_similarity).collect::<Vec<_>>(),
                })
            })
            .collect();
        st.write_json("sweep.json", &rows)?;
    }
    Ok(())
}

fn parse_json(bytes: &[u8]) -> Result<Value, PipelineError> {
    serde_json::from_slice(bytes).map_err(data)
}

/// Two-column numeric TSV with a header line.
fn parse_pairs(bytes: &[u8], xcol: usize, ycol: usize) -> Result<Vec<(f64, f64)>, PipelineError> {
    let text = std::str::from_utf8(bytes).map_err(data)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            let get = |i: usize| f.get(i).and_then(|s| s.parse::<f64>().ok());
            get(xcol)
                .zip(get(ycol))
                .ok_or_else(|| data(format!("bad row `{l}`")))
        })
        .collect()
}

fn parse_grid(bytes: &[u8]) -> Result<Vec<Vec<Option<f64>>>, PipelineError> {
    let text = std::str::from_utf8(bytes).map_err(data)?;
    let mut rows: Vec<Vec<Option<f64>>> = text
        .lines()
        .map(|l| l.split('\t').map(|x| x.parse().ok()).collect())
        .collect();
    // file is north-first; the renderer wants row 0 at the bottom
    rows.reverse();
    Ok(rows)
}

fn run_report(st: &mut Stage) -> Result<(), PipelineError> {
    let ingest_summary = parse_json(&st.upstream(Subcommand::Ingest, "summary.json")?)?;
    let stats = parse_json(&st.upstream(Subcommand::Stats, "summary.json")?)?;
    let bowtie = parse_json(&st.upstream(Subcommand::Bowtie, "summary.json")?)?;
    let distances = parse_json(&st.upstream(Subcommand::Bowtie, "distances.json")?)?;
    let hodge_summary = parse_json(&st.upstream(Subcommand::Hodge, "summary.json")?)?;
    let hist = parse_json(&st.upstream(Subcommand::Hodge, "histograms.json")?)?;
    let communities = parse_json(&st.upstream(Subcommand::Communities, "report.json")?)?;
    let loc = parse_json(&st.upstream(Subcommand::Nmf, "localization.json")?)?;
    let sim = parse_json(&st.upstream(Subcommand::Nmf, "similarity.json")?)?;

    let mut figures = Vec::new();
    let mut fig = |st: &mut Stage, name: &str, body: String| -> Result<(), PipelineError> {
        st.write(name, body)?;
        figures.push(format!("report/{name}"));
        Ok(())
    };

    let cin = parse_pairs(&st.upstream(Subcommand::Stats, "ccdf_in_degree.tsv")?, 0, 1)?;
    let cout = parse_pairs(
        &st.upstream(Subcommand::Stats, "ccdf_out_degree.tsv")?,
        0,
        1,
    )?;
    fig(
        st,
        "ccdf_degree.svg",
        svg::scatter(
            "Degree CCDF",
            "degree",
            "P(X >= x)",
            &[("in-degree", &cin), ("out-degree", &cout)],
            true,
            true,
        ),
    )?;
    let cflow = parse_pairs(&st.upstream(Subcommand::Stats, "ccdf_flow.tsv")?, 0, 1)?;
    fig(
        st,
        "ccdf_flow.svg",
        svg::scatter(
            "Link flow CCDF",
            "flow (yen)",
            "P(X >= x)",
            &[("flow", &cflow)],
            true,
            true,
        ),
    )?;
    let cfreq = parse_pairs(&st.upstream(Subcommand::Stats, "ccdf_frequency.tsv")?, 0, 1)?;
    fig(
        st,
        "ccdf_frequency.svg",
        svg::scatter(
            "Link frequency CCDF",
            "frequency",
            "P(X >= x)",
            &[("frequency", &cfreq)],
            true,
            true,
        ),
    )?;

    let shares: Vec<(&str, f64)> = Component::BOWTIE
        .iter()
        .map(|c| {
            (
                c.as_str(),
                bowtie["components"][c.as_str()]["fraction"]
                    .as_f64()
                    .unwrap_or(0.0),
            )
        })
        .collect();
    fig(
        st,
        "walnut.svg",
        svg::bars("Bowtie components", "share of accounts", &shares),
    )?;

    let edges: Vec<f64> = hist["edges"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(Value::as_f64)
        .collect();
    let counts: Vec<(String, Vec<usize>)> = hist["counts"]
        .as_object()
        .into_iter()
        .flatten()
        .map(|(k, v)| {
            (
                k.clone(),
                v.as_array()
                    .into_iter()
                    .flatten()
                    .filter_map(|x| x.as_u64().map(|x| x as usize))
                    .collect(),
            )
        })
        .collect();
    if edges.len() >= 2 {
        let series: Vec<(&str, &[usize])> = counts
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_slice()))
            .collect();
        fig(
            st,
            "potential_histograms.svg",
            svg::histogram("Hodge potential by component", "phi", &edges, &series),
        )?;
    }
    let pots = parse_pairs(&st.upstream(Subcommand::Hodge, "potentials.tsv")?, 2, 1)?;
    fig(
        st,
        "potential_vs_net_degree.svg",
        svg::scatter(
            "Potential vs net degree",
            "net degree",
            "phi",
            &[("accounts", &pots)],
            false,
            false,
        ),
    )?;

    let ranks: Vec<(f64, f64)> = communities["size_rank"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|p| Some((p[0].as_f64()?, p[1].as_f64()?)))
        .collect();
    fig(
        st,
        "community_size_rank.svg",
        svg::scatter(
            "Irreducible community sizes",
            "rank",
            "size",
            &[("communities", &ranks)],
            true,
            true,
        ),
    )?;

    let sim_grid: Vec<Vec<Option<f64>>> = sim
        .as_array()
        .into_iter()
        .flatten()
        .map(|row| {
            row.as_array()
                .into_iter()
                .flatten()
                .map(Value::as_f64)
                .collect()
        })
        .collect();
    let d = sim_grid.len();
    let flipped: Vec<Vec<Option<f64>>> = sim_grid.iter().rev().cloned().collect();
    fig(
        st,
        "nmf_similarity.svg",
        svg::heatmap("cos(w_m, h_n): rows n, columns m", &flipped),
    )?;
    for k in 1..=d {
        for side in ["source", "destination"] {
            let g =
                parse_grid(&st.upstream(Subcommand::Nmf, &format!("heatmaps/{side}_{k}.tsv"))?)?;
            fig(
                st,
                &format!("nmf_{side}_{k}.svg"),
                svg::heatmap(&format!("{side} basis {k}"), &g),
            )?;
        }
    }

    let bundle = json!({
        "version": VERSION,
        "ingest": ingest_summary,
        "network": stats,
        "bowtie": bowtie,
        "bowtie_distances": distances,
        "hodge": hodge_summary,
        "communities": communities,
        "nmf": loc,
        "nmf_similarity": sim,
        "figures": figures,
    });
    st.write_json("report.json", &bundle)
}

/// Reads a manifest written by an earlier run.
pub fn read_manifest(out: &Path, name: Subcommand) -> Result<Manifest, PipelineError> {
    let path = out.join(name.as_str()).join("manifest.json");
    let f = fs::File::open(&path).map_err(io_err(&path))?;
    serde_json::from_reader(BufReader::new(f)).map_err(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dir: &Path) -> RunConfig {
        RunConfig {
            out: dir.to_path_buf(),
            nodes: 400,
            grid_k: 20,
            nmf_d: 3,
            trials: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn downstream_without_ingest_names_ingest() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_subcommand(Subcommand::Hodge, &cfg(dir.path())).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::MissingArtifact {
                required: Subcommand::Ingest,
                ..
            }
        ));
        assert!(err.to_string().contains("`ingest`"));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn config_errors_name_fields() {
        let dir = tempfile::tempdir().unwrap();
        let bad = RunConfig {
            grid_k: 0,
            tol: 2.0,
            ..cfg(dir.path())
        };
        let err = run_subcommand(Subcommand::Stats, &bad).unwrap_err();
        let text = err.to_string();
        assert!(
            text.contains("--grid-k") && text.contains("--tol"),
            "{text}"
        );
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn synth_then_bowtie() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path());
        run_subcommand(Subcommand::Synth, &c).unwrap();
        run_subcommand(Subcommand::Ingest, &c).unwrap();
        let m = run_subcommand(Subcommand::Bowtie, &c).unwrap();
        assert_eq!(m.inputs[0].path, "ingest/links.csv");
        let s: Value =
            serde_json::from_slice(&fs::read(dir.path().join("bowtie/summary.json")).unwrap())
                .unwrap();
        let total: u64 = Component::BOWTIE
            .iter()
            .map(|c| s["components"][c.as_str()]["accounts"].as_u64().unwrap())
            .sum();
        assert_eq!(total, s["gwcc"].as_u64().unwrap());
        let part = fs::read_to_string(dir.path().join("bowtie/partition.tsv")).unwrap();
        assert_eq!(part.lines().count(), 401);
    }

    #[test]
    fn strict_ingest_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log.csv");
        fs::write(&log, "2018-01-01T00:00:00,a,b,not-a-number,firm,firm\n").unwrap();
        let c = RunConfig {
            input: Some(log),
            strict: true,
            ..cfg(dir.path())
        };
        assert_eq!(
            run_subcommand(Subcommand::Ingest, &c)
                .unwrap_err()
                .exit_code(),
            2
        );
    }
}
