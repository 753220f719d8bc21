use std::path::Path;
use std::time::Duration;

use log::info;
use nsc_core::baselines::{maml_train, pretrain, random_init, MamlConfig, PretrainConfig};
use nsc_core::benchkit::{downcast_mse, gen_inputs};
use nsc_core::corpus::{
    build_corpus, collect_sources, read_jsonl, sources_from_strings, synth_corpus, write_audit, write_jsonl, CorpusBuild, CorpusConfig,
    InputBank, ProgramRecord, Stage,
};
use nsc_core::evalkit::{
    run_data_efficiency, run_training_time, subset_splits, summarize, CompiledInit, ExperimentPlan, FinetuneTrainer, FixedInit,
    ImprovementTable, Initializer, RandomInit, TrainingTimeResults, TrialResult,
};
use nsc_core::hypernet::{train, EncoderConfig, HypernetModel, HypernetTrainConfig};
use nsc_core::quantize::{image_mse, image_ssim, kmeans_palette, remap, Distance, Image, KMeansConfig};
use nsc_core::rng::{derive_seed, Rng};
use nsc_core::surrogate::{finetune, FinetuneConfig, ParamVector, SurrogateNet, Topology, MAX_INPUTS};

use crate::args::*;
use crate::error::CliError;
use crate::manifest::{sibling, RunManifest};

fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingFile(path.to_path_buf()))
    }
}

fn load_records(path: &Path) -> Result<Vec<ProgramRecord>, CliError> {
    require(path)?;
    Ok(read_jsonl(path)?)
}

fn load_model(path: &Path) -> Result<HypernetModel, CliError> {
    require(path)?;
    Ok(HypernetModel::load(path)?)
}

fn load_params(path: &Path) -> Result<ParamVector, CliError> {
    require(path)?;
    Ok(ParamVector::load(path)?)
}

fn finish_single(m: &mut RunManifest, out: &Path) {
    m.artifact(out);
    m.location = Some(sibling(out));
}

pub fn run(cmd: Command, m: &mut RunManifest) -> Result<(), CliError> {
    match cmd {
        Command::CorpusBuild(a) => corpus_build(a, m),
        Command::CorpusSynth(a) => corpus_synth(a, m),
        Command::HypernetTrain(a) => hypernet_train(a, m),
        Command::BaselineTrain { kind: BaselineKind::Maml(a) } => maml(a, m),
        Command::BaselineTrain { kind: BaselineKind::Pretrain(a) } => pretrain_cmd(a, m),
        Command::Compile(a) => compile(a, m),
        Command::Finetune(a) => finetune_cmd(a, m),
        Command::EvalDataEfficiency(a) => eval(a, false, m),
        Command::EvalTrainingTime(a) => eval(a, true, m),
        Command::Quantize(a) => quantize(a, m),
        Command::DowncastStudy(a) => downcast(a, m),
        Command::Report(a) => report(a, m),
    }
}

fn timeout(secs: f64) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(secs).map_err(|e| CliError::Usage(format!("timeout-secs: {e}")))
}

fn print_build(build: &CorpusBuild) {
    println!("records {} candidates {} rejected {}", build.records.len(), build.candidates, build.rejections.len());
    for stage in Stage::ORDER {
        let n = build.rejected_at(stage);
        if n > 0 {
            println!("rejected-at {} {}", stage.label(), n);
        }
    }
}

fn write_build(build: &CorpusBuild, out: &Path, audit: Option<&Path>, m: &mut RunManifest) -> Result<(), CliError> {
    write_jsonl(&build.records, out)?;
    finish_single(m, out);
    if let Some(a) = audit {
        write_audit(&build.rejections, a)?;
        m.artifact(a);
    }
    print_build(build);
    Ok(())
}

fn corpus_build(a: CorpusBuildArgs, m: &mut RunManifest) -> Result<(), CliError> {
    require(&a.root)?;
    let cfg = CorpusConfig {
        max_tokens: a.max_tokens,
        max_arity: a.max_arity,
        out_limit: a.out_limit,
        timeout: timeout(a.timeout_secs)?,
        io_rows: a.io_rows,
        seed: a.seed,
        jobs: a.jobs.max(1),
        determinism_runs: a.determinism_runs,
        train_fraction: a.train_fraction,
        ..CorpusConfig::default()
    };
    m.seed("root", a.seed);
    let files = collect_sources(&a.root)?;
    info!("{} source files under {}", files.len(), a.root.display());
    let bank = InputBank::generate(a.seed, a.io_rows, MAX_INPUTS);
    let build = build_corpus(files, &bank, &cfg)?;
    write_build(&build, &a.out, a.audit.as_deref(), m)
}

fn corpus_synth(a: CorpusSynthArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let cfg = CorpusConfig {
        timeout: timeout(a.timeout_secs)?,
        io_rows: a.io_rows,
        seed: a.seed,
        jobs: a.jobs.max(1),
        train_fraction: a.train_fraction,
        ..CorpusConfig::default()
    };
    m.seed("root", a.seed);
    let sources = synth_corpus(a.family, a.count, a.seed)?;
    let files = sources_from_strings(&format!("synth-{}", a.family.name()), &sources);
    let bank = InputBank::generate(a.seed, a.io_rows, MAX_INPUTS);
    let build = build_corpus(files, &bank, &cfg)?;
    write_build(&build, &a.out, None, m)
}

fn hypernet_train(a: HypernetTrainArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let records = load_records(&a.data)?;
    let encoder = EncoderConfig {
        layers: a.layers,
        hidden: a.hidden,
        heads: a.heads,
        feed_forward: a.feed_forward,
        ..EncoderConfig::default()
    };
    let cfg = HypernetTrainConfig {
        program_batch: a.program_batch,
        input_batch: a.input_batch,
        learning_rate: a.lr,
        epochs: a.epochs,
        padding: a.padding.into(),
        seed: a.seed,
        vocab_size: a.vocab_size,
    };
    m.seed("root", a.seed);
    let (model, report) = train(&records, encoder, &cfg)?;
    model.save(&a.out)?;
    finish_single(m, &a.out);
    let last = report.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!("programs {} steps {} skipped {} final-loss {last}", records.len(), report.steps, report.skipped_batches);
    Ok(())
}

fn maml(a: MamlArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let records = load_records(&a.data)?;
    let cfg = MamlConfig {
        meta_batch: a.meta_batch,
        input_batch: a.input_batch,
        epochs: a.epochs,
        inner_lr: a.inner_lr,
        outer_lr: a.outer_lr,
        inner_steps: a.inner_steps,
        padding: a.padding.into(),
        seed: a.seed,
        support_fraction: a.support_fraction,
        ..MamlConfig::default()
    };
    m.seed("root", a.seed);
    let (params, report) = maml_train(&records, &cfg)?;
    params.save(&a.out)?;
    finish_single(m, &a.out);
    let post = report.post_losses.last().copied().unwrap_or(f64::NAN);
    println!("programs {} meta-iterations {} final-query-loss {post}", records.len(), report.post_losses.len());
    Ok(())
}

fn pretrain_cmd(a: PretrainArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let records = load_records(&a.data)?;
    let cfg = PretrainConfig {
        program_batch: a.program_batch,
        input_batch: a.input_batch,
        learning_rate: a.lr,
        epochs: a.epochs,
        padding: a.padding.into(),
        seed: a.seed,
        ..PretrainConfig::default()
    };
    m.seed("root", a.seed);
    let (params, report) = pretrain(&records, &cfg)?;
    params.save(&a.out)?;
    finish_single(m, &a.out);
    let last = report.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!("programs {} steps {} final-loss {last}", records.len(), report.steps);
    Ok(())
}

fn compile(a: CompileArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    require(&a.source)?;
    let source = std::fs::read_to_string(&a.source)?;
    let params = model.compile(&source)?;
    params.save(&a.out)?;
    finish_single(m, &a.out);
    println!("params {}", params.len());
    Ok(())
}

fn find_program<'a>(records: &'a [ProgramRecord], key: &str) -> Result<&'a ProgramRecord, CliError> {
    if let Some(r) = records.iter().find(|r| r.id == key) {
        return Ok(r);
    }
    key.parse::<usize>()
        .ok()
        .and_then(|i| records.get(i))
        .ok_or_else(|| CliError::Data(format!("no program {key:?} in dataset")))
}

fn finetune_cmd(a: FinetuneArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let records = load_records(&a.data)?;
    let rec = find_program(&records, &a.program)?;
    let topology = Topology::covering();
    let init_seed = derive_seed(a.seed, &[0x12d]);
    let init = match &a.init {
        Some(p) => load_params(p)?,
        None => random_init(&topology, &mut Rng::new(init_seed)),
    };
    let splits = subset_splits(rec, a.size, a.val_fraction, a.padding.into(), topology.inputs(), a.seed).map_err(CliError::Data)?;
    let mut cfg = FinetuneConfig {
        topology,
        learning_rate: a.lr,
        epochs: a.epochs,
        seed: a.seed,
        ..FinetuneConfig::default()
    };
    if splits.train.is_empty() {
        cfg.epochs = 0;
    }
    m.seed("root", a.seed);
    if a.init.is_none() {
        m.seed("init", init_seed);
    }
    let trace = finetune(&init, &splits, &cfg)?;
    trace.final_params.save(&a.out)?;
    finish_single(m, &a.out);
    if let Some(path) = &a.log {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "train", "val", "test"])?;
        for e in &trace.log {
            let val = e.val.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([e.epoch.to_string(), e.train.to_string(), val, e.test.to_string()])?;
        }
        w.flush()?;
        m.artifact(path);
    }
    println!(
        "program {} initial-test {} reported-test {}",
        rec.id,
        trace.initial_test_loss(),
        trace.reported_test_loss
    );
    Ok(())
}

fn methods(a: &EvalArgs) -> Result<Vec<Box<dyn Initializer>>, CliError> {
    let mut out: Vec<Box<dyn Initializer>> = vec![Box::new(RandomInit::default())];
    if !a.cpn.is_empty() {
        let models = a.cpn.iter().map(|p| load_model(p)).collect::<Result<_, _>>()?;
        out.push(Box::new(CompiledInit { name: "CPN".into(), models }));
    }
    for (name, paths) in [("MAML", &a.maml), ("PTS", &a.pts)] {
        if !paths.is_empty() {
            let vectors = paths.iter().map(|p| load_params(p)).collect::<Result<_, _>>()?;
            out.push(Box::new(FixedInit { name: name.into(), vectors }));
        }
    }
    Ok(out)
}

fn write_reports(trials: &[TrialResult], baseline: &str, dir: &Path, m: &mut RunManifest) -> Result<ImprovementTable, CliError> {
    let table = ImprovementTable::from_results(trials, baseline);
    if table.entries.is_empty() {
        return Err(CliError::Data(format!("no usable {baseline} baseline cells")));
    }
    let csv_path = dir.join("table.csv");
    std::fs::write(&csv_path, table.to_csv())?;
    let summary_path = dir.join("summary.json");
    std::fs::write(&summary_path, summarize(&table).to_json())?;
    m.artifact(csv_path);
    m.artifact(summary_path);
    m.location = Some(dir.join("manifest.txt"));
    Ok(table)
}

fn eval(a: EvalArgs, training_time: bool, m: &mut RunManifest) -> Result<(), CliError> {
    let mut records = load_records(&a.data)?;
    if a.programs > 0 {
        records.truncate(a.programs);
    }
    if records.is_empty() {
        return Err(CliError::Data("dataset has no programs".into()));
    }
    let methods = methods(&a)?;
    let refs: Vec<&dyn Initializer> = methods.iter().map(|b| b.as_ref()).collect();
    let mut plan = ExperimentPlan::new(records, a.seed);
    plan.sizes = a.sizes.clone();
    plan.trials = a.trials;
    plan.finetune.epochs = a.epochs;
    plan.finetune.learning_rate = a.lr;
    plan.val_fraction = a.val_fraction;
    plan.padding = a.padding.into();
    plan.jobs = a.jobs.max(1);
    m.seed("root", a.seed);
    std::fs::create_dir_all(&a.out_dir)?;
    let trials_path = a.out_dir.join("trials.json");
    let trials = if training_time {
        let res = run_training_time(&plan, &refs, &FinetuneTrainer).map_err(CliError::Runtime)?;
        std::fs::write(&trials_path, serde_json::to_string_pretty(&res)?)?;
        res.trials
    } else {
        let res = run_data_efficiency(&plan, &refs, &FinetuneTrainer);
        std::fs::write(&trials_path, serde_json::to_string_pretty(&res)?)?;
        res
    };
    m.artifact(&trials_path);
    let failed = trials.iter().filter(|t| t.error.is_some()).count();
    let table = write_reports(&trials, "RND", &a.out_dir, m)?;
    println!("trials {} failed {} cells {}", trials.len(), failed, table.entries.len());
    Ok(())
}

fn report(a: ReportArgs, m: &mut RunManifest) -> Result<(), CliError> {
    require(&a.trials)?;
    let text = std::fs::read_to_string(&a.trials)?;
    let trials: Vec<TrialResult> = match serde_json::from_str(&text) {
        Ok(t) => t,
        Err(_) => serde_json::from_str::<TrainingTimeResults>(&text)?.trials,
    };
    std::fs::create_dir_all(&a.out_dir)?;
    let table = write_reports(&trials, &a.baseline, &a.out_dir, m)?;
    println!("trials {} cells {}", trials.len(), table.entries.len());
    Ok(())
}

fn quantize(a: QuantizeArgs, m: &mut RunManifest) -> Result<(), CliError> {
    require(&a.input)?;
    let img = Image::load(&a.input)?;
    let distance = match a.distance {
        DistanceMode::Exact => Distance::Exact,
        DistanceMode::Surrogate => {
            let path = a
                .surrogate
                .as_ref()
                .ok_or_else(|| CliError::Usage("--distance surrogate needs --surrogate".into()))?;
            Distance::Surrogate(SurrogateNet::interpret(&Topology::covering(), &load_params(path)?)?)
        }
    };
    let cfg = KMeansConfig {
        k: a.k,
        max_iters: a.max_iters,
        centroid_tolerance: a.tolerance,
        distance: distance.clone(),
        seed: a.seed,
        jobs: a.jobs.max(1),
    };
    m.seed("root", a.seed);
    let palette = kmeans_palette(&img, &cfg)?;
    let out = remap(&img, &palette.centroids, &distance)?;
    out.save(&a.out)?;
    finish_single(m, &a.out);
    let mse = image_mse(&img, &out)?;
    let ssim = image_ssim(&img, &out)?;
    if let Some(path) = &a.report {
        let colors: Vec<[u8; 3]> = palette.colors();
        let doc = serde_json::json!({
            "k": a.k,
            "iterations": palette.iterations,
            "converged": palette.converged,
            "objective": palette.objective.last(),
            "palette": colors,
            "mse": mse,
            "ssim": ssim,
            "ssim_channel": "luma",
        });
        std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
        m.artifact(path);
    }
    println!("iterations {} converged {} mse {mse} ssim {ssim}", palette.iterations, palette.converged);
    Ok(())
}

fn downcast(a: DowncastArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let kernels = a.kernel_list().map_err(CliError::Usage)?;
    m.seed("root", a.seed);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kernel", "train_rows", "test_rows", "dropped_train", "dropped_test", "train_mse", "test_mse"])?;
    for k in kernels {
        let d = gen_inputs(k, a.seed)?;
        let train = downcast_mse(k, &d.train)?;
        let test = downcast_mse(k, &d.test)?;
        w.write_record([
            k.name().to_string(),
            d.train.rows().to_string(),
            d.test.rows().to_string(),
            d.dropped_train.to_string(),
            d.dropped_test.to_string(),
            format!("{train:e}"),
            format!("{test:e}"),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    match &a.out {
        Some(path) => {
            std::fs::write(path, &bytes)?;
            finish_single(m, path);
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}
