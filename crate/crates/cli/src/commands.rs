use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::{info, warn};
use rayon::prelude::*;

use partmatch::benchmark::{run_methods, BenchConfig, MethodSet, Prepared};
use partmatch::descriptor::descriptor_from_pool;
use partmatch::descriptor_matcher::{rank_imm, rerank_cascade};
use partmatch::direct_matcher::rank_database;
use partmatch::evaluation::{
    find_relevant_pairs, space_report, timing_report, EvalSummary, RelevanceConfig,
};
use partmatch::ingest::{load_map, load_map_dir, MapCollection};
use partmatch::synth::{generate, SynthConfig};
use partmatch::{
    build_descriptor, rank_hmm, CpdConfig, Dictionary, DmmConfig, Error, MapDescriptor,
    MatchStrategy, PointSetMap, RankResult,
};

use crate::settings::{Scheme, Settings};
use crate::Failure;

const CONFIG_ECHO: &str = "effective_config.txt";
const DESCRIPTOR_EXT: &str = "pslm";

fn require_out(s: &Settings) -> Result<&Path, Failure> {
    s.out
        .as_deref()
        .ok_or_else(|| Failure::Usage("--out is required".into()))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::Data)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Data)
}

fn echo_config(dir: &Path, s: &Settings, command: &str) -> Result<(), Failure> {
    write(&dir.join(CONFIG_ECHO), s.to_config_text(command))
}

fn cpd_config(s: &Settings) -> CpdConfig {
    CpdConfig {
        seed: s.seed,
        gc: s.gc,
        ..CpdConfig::default()
    }
}

fn dmm_config(s: &Settings) -> DmmConfig {
    DmmConfig {
        seed: s.seed,
        ..DmmConfig::default()
    }
}

fn require_existing(path: &Path, what: &str) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{what} {} does not exist",
            path.display()
        )))
    }
}

fn require_dict(s: &Settings, why: &str) -> Result<PathBuf, Failure> {
    let dict = s
        .dict
        .clone()
        .ok_or_else(|| Failure::Usage(format!("--dict is required {why}")))?;
    if !dict.is_file() {
        return Err(Failure::Usage(format!(
            "dictionary {} is not a file",
            dict.display()
        )));
    }
    Ok(dict)
}

/// Files with extension `ext` under each input (directories are not recursed
/// into beyond one level), in input order, directory entries sorted.
fn expand_inputs(inputs: &[PathBuf], ext: &str) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for input in inputs {
        require_existing(input, "input")?;
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .with_context(|| format!("listing {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == ext))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

fn is_descriptor(path: &Path) -> bool {
    path.extension().is_some_and(|x| x == DESCRIPTOR_EXT)
}

pub fn synth(s: &Settings) -> Result<(), Failure> {
    let out = require_out(s)?;
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        seed: s.seed,
        noise_sigma: s.sigma.unwrap_or(defaults.noise_sigma),
        keep_prob: s.keep.unwrap_or(defaults.keep_prob),
        local_window: s.window.unwrap_or(defaults.local_window),
        global_window: s.window.unwrap_or(defaults.global_window),
        local_stride: s.stride.unwrap_or(defaults.local_stride),
        ..defaults
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let data = generate(&cfg)?;
    create_dir(out)?;
    data.collection.save(out)?;
    let mut pairs = String::from("local,global\n");
    for (l, g) in &data.relevant_pairs {
        let _ = writeln!(pairs, "{l},{g}");
    }
    write(&out.join("relevant_pairs.csv"), pairs)?;
    echo_config(out, s, "synth")?;
    info!(
        "wrote {} globals, {} locals, {} relevant pairs to {}",
        data.collection.globals.len(),
        data.collection.locals.len(),
        data.relevant_pairs.len(),
        out.display()
    );
    Ok(())
}

pub fn build(s: &Settings, inputs: &[PathBuf]) -> Result<(), Failure> {
    // Everything the user could have got wrong is checked before any output.
    let dict_path = require_dict(s, "to build descriptors")?;
    let out = require_out(s)?;
    let paths = expand_inputs(inputs, "map")?;
    if paths.is_empty() {
        return Err(Failure::Usage("no input maps found".into()));
    }
    let maps = paths
        .iter()
        .map(load_map::<f64>)
        .collect::<Result<Vec<_>, Error>>()?;
    let dictionary = load_map::<f64>(&dict_path)?;
    let cfg = cpd_config(s);
    let dict = Dictionary::new(&dictionary, &cfg)?;

    let pools: Vec<_> = maps
        .par_iter()
        .map(|m| partmatch::cpd::discover_parts_in(m, &dict, &cfg))
        .collect();

    create_dir(out)?;
    let mut log = String::from("map_id,points,pool_size,top_as\n");
    let mut failures = Vec::new();
    for (m, pool) in maps.iter().zip(pools) {
        let encoded = pool.and_then(|pool| Ok((descriptor_from_pool(m, &dict, &pool, s.k)?, pool)));
        match encoded {
            Ok((d, pool)) => {
                d.write_file(out.join(format!("{}.{DESCRIPTOR_EXT}", m.id())))?;
                let top = pool[0].as_score.unwrap_or(0.0);
                let _ = writeln!(log, "{},{},{},{top:.6}", m.id(), m.len(), pool.len());
            }
            Err(e @ (Error::EmptyPool | Error::Range(_))) => {
                warn!("{}: {e}", m.id());
                let _ = writeln!(log, "{},{},0,", m.id(), m.len());
                failures.push(format!("{}: {e}", m.id()));
            }
            Err(e) => {
                return Err(anyhow::Error::from(e)
                    .context(format!("map {}", m.id()))
                    .into())
            }
        }
    }
    write(&out.join("build_log.csv"), log)?;
    let mut manifest = failures.join("\n");
    if !manifest.is_empty() {
        manifest.push('\n');
    }
    write(&out.join("failures.txt"), manifest)?;
    echo_config(out, s, "build")?;
    info!(
        "built {} of {} descriptors in {}",
        maps.len() - failures.len(),
        maps.len(),
        out.display()
    );
    if failures.len() == maps.len() {
        Err(Failure::Data(anyhow::anyhow!(
            "no map produced a descriptor"
        )))
    } else if !failures.is_empty() {
        Err(Failure::Partial(format!(
            "{} maps have no descriptor, see failures.txt",
            failures.len()
        )))
    } else {
        Ok(())
    }
}

fn single_scheme(s: &Settings) -> Result<Scheme, Failure> {
    match s.scheme.as_deref() {
        None => Ok(Scheme::Imm),
        Some([one]) if *one != Scheme::Random => Ok(*one),
        Some(_) => Err(Failure::Usage(
            "match takes exactly one of dmm, imm, hmm".into(),
        )),
    }
}

fn single_rerank(s: &Settings) -> Result<usize, Failure> {
    match s.rerank.as_deref() {
        None | Some([]) => Ok(0),
        Some([r]) => Ok(*r),
        Some(_) => Err(Failure::Usage("match takes a single --rerank depth".into())),
    }
}

/// The top `k` parts of every stored descriptor.
fn load_descriptors(paths: &[PathBuf], k: usize) -> Result<Vec<MapDescriptor<f64>>, Failure> {
    paths
        .iter()
        .map(|p| {
            let mut d = MapDescriptor::<f64>::read_file(p)?;
            d.parts.truncate(k);
            Ok(d)
        })
        .collect()
}

pub fn match_query(
    s: &Settings,
    query: &Path,
    db: &[PathBuf],
    db_maps: Option<&Path>,
) -> Result<(), Failure> {
    let scheme = single_scheme(s)?;
    let rerank = single_rerank(s)?;
    require_existing(query, "query")?;
    let query_is_descriptor = is_descriptor(query);
    match scheme {
        Scheme::Dmm if rerank > 0 => {
            return Err(Failure::Usage("--rerank applies to imm and hmm".into()))
        }
        Scheme::Dmm | Scheme::Hmm if query_is_descriptor => {
            return Err(Failure::Usage(format!(
                "{} needs the original query map",
                scheme.name()
            )))
        }
        _ => {}
    }
    if rerank > 0 {
        if query_is_descriptor {
            return Err(Failure::Usage(
                "--rerank needs the original query map".into(),
            ));
        }
        match db_maps {
            None => return Err(Failure::Usage("--rerank needs --db-maps".into())),
            Some(p) => require_existing(p, "database map directory")?,
        }
    }
    let dict_path = match scheme {
        Scheme::Hmm => Some(require_dict(s, "for hmm")?),
        Scheme::Imm if !query_is_descriptor => Some(require_dict(s, "to describe a query map")?),
        _ => None,
    };
    let db_paths = expand_inputs(
        db,
        if scheme == Scheme::Dmm {
            "map"
        } else {
            DESCRIPTOR_EXT
        },
    )?;
    if db_paths.is_empty() {
        return Err(Failure::Usage("the database is empty".into()));
    }

    let cpd = cpd_config(s);
    let dmm = dmm_config(s);
    let query_map = (!query_is_descriptor)
        .then(|| load_map::<f64>(query))
        .transpose()?;
    let dictionary = dict_path.map(load_map::<f64>).transpose()?;
    let mut result: RankResult = match scheme {
        Scheme::Dmm => {
            let maps = db_paths
                .iter()
                .map(load_map::<f64>)
                .collect::<Result<Vec<_>, Error>>()?;
            rank_database(query_map.as_ref().expect("checked above"), &maps, &dmm)?
        }
        Scheme::Imm => {
            let strategy = s.strategy.unwrap_or(MatchStrategy::SumMax);
            let q = match (&query_map, &dictionary) {
                (Some(m), Some(d)) => build_descriptor(m, d, s.k, &cpd)?,
                _ => load_descriptors(&[query.to_path_buf()], s.k)?.remove(0),
            };
            rank_imm(&q, &load_descriptors(&db_paths, s.k)?, strategy)?
        }
        Scheme::Hmm => {
            let strategy = s.strategy.unwrap_or(MatchStrategy::SumMaxWeighted);
            let db = load_descriptors(&db_paths, s.k)?;
            rank_hmm(
                query_map.as_ref().expect("checked above"),
                dictionary.as_ref().expect("checked above"),
                &db,
                s.k,
                &cpd,
                strategy,
            )?
        }
        Scheme::Random => unreachable!("rejected by single_scheme"),
    };
    if rerank > 0 {
        let originals: HashMap<String, PointSetMap<f64>> =
            load_map_dir::<f64>(db_maps.expect("checked above"))?
                .into_iter()
                .map(|m| (m.id().to_owned(), m))
                .collect();
        result = rerank_cascade(
            &result,
            query_map.as_ref().expect("checked above"),
            &originals,
            rerank,
            &dmm,
        )?;
    }

    let mut csv = Vec::new();
    result
        .write_csv(&mut csv, true)
        .context("formatting ranking")?;
    match &s.out {
        Some(out) => {
            create_dir(out)?;
            write(&out.join("ranking.csv"), &csv)?;
            echo_config(out, s, "match")?;
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&csv)
                .context("writing ranking")?;
        }
    }
    Ok(())
}

fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, Failure> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.split_once(',') {
            Some((a, b)) => Ok((a.trim().to_owned(), b.trim().to_owned())),
            None => Err(Failure::Data(anyhow::anyhow!(
                "{}:{}: expected `local,global`",
                path.display(),
                i + 1
            ))),
        })
        .collect()
}

pub fn eval(s: &Settings, data: &Path) -> Result<(), Failure> {
    let out = require_out(s)?;
    require_existing(data, "dataset")?;
    let schemes = s
        .scheme
        .clone()
        .unwrap_or_else(|| vec![Scheme::Dmm, Scheme::Imm, Scheme::Hmm]);
    let collection = MapCollection::load(data)?;
    let pairs_path = data.join("relevant_pairs.csv");
    let pairs = if pairs_path.is_file() {
        read_pairs(&pairs_path)?
    } else {
        info!("no relevant_pairs.csv, deriving pairs from annotations");
        let locals: Vec<&str> = collection.locals.iter().map(|m| m.id()).collect();
        let globals: Vec<&str> = collection.globals.iter().map(|m| m.id()).collect();
        find_relevant_pairs(
            &locals,
            &globals,
            &collection.annotations,
            &RelevanceConfig::default(),
        )?
    };

    let mut config = BenchConfig::seeded(s.seed);
    config.cpd.gc = s.gc;
    config.db_size = s.db_size;
    config.max_tasks = s.max_tasks;
    let prepared = Prepared::new(&collection, &pairs, config)?;

    let defaults = MethodSet::default();
    let has = |x: Scheme| schemes.contains(&x);
    let methods = MethodSet {
        dmm: has(Scheme::Dmm),
        imm_k: if has(Scheme::Imm) {
            defaults.imm_k.clone()
        } else {
            Vec::new()
        },
        hmm_k: if has(Scheme::Hmm) {
            defaults.hmm_k.clone()
        } else {
            Vec::new()
        },
        rerank: if has(Scheme::Hmm) {
            s.rerank.clone().unwrap_or(defaults.rerank.clone())
        } else {
            Vec::new()
        },
        rerank_k: s.k,
        imm_strategy: s.strategy.unwrap_or(defaults.imm_strategy),
        hmm_strategy: s.strategy.unwrap_or(defaults.hmm_strategy),
        random: has(Scheme::Random),
    };
    let (reports, missing) = run_methods(&prepared, &methods);

    let mut summary = EvalSummary::default();
    for r in &reports {
        summary.push(r);
    }
    let descriptors = collection
        .globals
        .iter()
        .filter(|g| prepared.pools.contains_key(g.id()))
        .map(|g| prepared.descriptor(g.id(), s.k))
        .collect::<Result<Vec<_>, Error>>()?;
    summary.space = space_report(&descriptors, &collection.globals);
    if s.timing {
        let strategy = methods.hmm_strategy;
        let dm = timing_report("hMM per pair", &defaults.hmm_k, |k| {
            prepared.time_hmm_pairs(k, strategy, 5)
        })?;
        let dmm = timing_report("dMM per pair", &[0], |_| prepared.time_dmm_pairs(5))?;
        summary.timing = Some(vec![dm, dmm]);
    }

    create_dir(out)?;
    write(&out.join("anr.csv"), summary.anr_csv())?;
    write(&out.join("histogram.csv"), summary.histogram_csv())?;
    write(&out.join("space.csv"), summary.space_csv())?;
    write(&out.join("summary.json"), summary.to_json())?;
    let mut tasks = String::from("query,ground_truth\n");
    for t in &prepared.tasks {
        let _ = writeln!(tasks, "{},{}", t.query, t.ground_truth);
    }
    write(&out.join("tasks.csv"), tasks)?;
    let mut failures: Vec<&str> = prepared.failures.iter().map(String::as_str).collect();
    failures.sort_unstable();
    write(
        &out.join("failures.txt"),
        failures
            .iter()
            .map(|f| format!("{f}\n"))
            .collect::<String>(),
    )?;
    let mut missing_text = String::new();
    for m in &missing {
        let _ = writeln!(missing_text, "{m}");
    }
    write(&out.join("missing.txt"), missing_text)?;
    echo_config(out, s, "eval")?;

    let by_method: BTreeMap<&str, f64> = summary
        .anr
        .iter()
        .map(|r| (r.method.as_str(), r.anr))
        .collect();
    info!("ANR: {by_method:?}");
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(format!(
            "{} cells failed: {}",
            missing.len(),
            missing.join(", ")
        )))
    }
}
