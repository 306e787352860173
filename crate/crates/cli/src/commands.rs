use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swnn_core::{
    benchmark, dataset_statistics, evaluate, format_ranked, gram_min_eigenvalue, load_weights,
    parse_dataset, parse_ranked, predict_batch, score_predictions, Dataset, EvalReport,
    HyperParams, LabelId, PredictOptions, Predictor, SparseVector, SyntheticConfig, TrainingIndex,
    GRAM_CAP,
};

use crate::args::*;
use crate::UsageError;

/// The (alpha, beta) pairs swept by `eval --grid`, then the S values tried
/// with the best pair.
const ALPHA_BETA_GRID: [(f64, u32); 6] =
    [(0.0, 0), (0.5, 0), (1.0, 0), (1.0, 1), (2.0, 0), (2.0, 1)];
const S_GRID: [usize; 3] = [25, 50, 75];

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats(a) => stats(a),
        Command::Index(a) => index(a),
        Command::Predict(a) => predict(a),
        Command::OvrPredict(a) => ovr_predict(a),
        Command::Eval(a) => eval(a),
        Command::Score(a) => score(a),
        Command::Bench(a) => bench(a),
        Command::KernelCheck(a) => kernel_check(a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::with_capacity(1 << 20, f))
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(open(path)?).with_context(|| format!("while parsing {}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_raw(s: &str) -> io::Result<()> {
    io::stdout().lock().write_all(s.as_bytes())
}

fn emit(line: &str) -> io::Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")
}

fn load_model(src: &ModelSource, cmd: &str) -> Result<TrainingIndex> {
    match (&src.train, &src.index) {
        (Some(train), None) => Ok(TrainingIndex::build(&read_dataset(train)?)),
        (None, Some(path)) => TrainingIndex::read_from(open(path)?)
            .with_context(|| format!("while reading index {}", path.display())),
        _ => Err(UsageError(format!("`{cmd}` needs exactly one of --train or --index")).into()),
    }
}

fn hyper_params(a: &HyperArgs, index: &TrainingIndex) -> Result<HyperParams> {
    let s =
        a.s.unwrap_or_else(|| (index.mean_labels_per_entry().ceil() as usize).max(1));
    HyperParams::new(s, a.alpha, a.beta, a.topk).map_err(|e| UsageError(e.to_string()).into())
}

fn options(a: &HyperArgs) -> PredictOptions {
    PredictOptions {
        support_mode: a.support.into(),
        fallback: a.fallback.into(),
    }
}

fn default_workers(w: Option<usize>) -> usize {
    w.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn stats(a: StatsArgs) -> Result<()> {
    let d = read_dataset(&a.dataset)?;
    let st = dataset_statistics(&d)?;
    if a.json {
        emit(&serde_json::to_string_pretty(&st)?)?;
    } else {
        emit(&format!(
            "entries {}  features {}  labels {}",
            d.num_entries(),
            d.num_features,
            d.num_labels
        ))?;
        emit_raw(&st.to_table())?;
    }
    Ok(())
}

fn index(a: IndexArgs) -> Result<()> {
    let start = Instant::now();
    let d = read_dataset(&a.train)?;
    let idx = TrainingIndex::build(&d);
    let f = File::create(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    idx.write_to(BufWriter::new(f))?;
    eprintln!(
        "indexed {} entries, {} postings in {:.2}s",
        idx.num_entries(),
        idx.nnz(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let idx = load_model(&a.model, "predict")?;
    let hp = hyper_params(&a.hp, &idx)?;
    let test = read_dataset(&a.test)?;
    let queries: Vec<SparseVector> = test.features().cloned().collect();
    let predictor = Predictor::new(&idx, hp, options(&a.hp));
    let batch = predict_batch(&predictor, &queries, default_workers(a.workers), false);
    if batch.stats.unseen_features > 0 {
        eprintln!(
            "warning: {} test features are outside the training dimension",
            batch.stats.unseen_features
        );
    }
    let mut out = output(a.out.as_deref())?;
    for p in &batch.predictions {
        writeln!(out, "{}", format_ranked(&p.ranked))?;
    }
    out.flush()?;
    Ok(())
}

fn ovr_predict(a: OvrPredictArgs) -> Result<()> {
    if a.topk == 0 {
        bail!(UsageError("--topk must be at least 1".into()));
    }
    let w = load_weights(open(&a.weights)?)
        .with_context(|| format!("while parsing {}", a.weights.display()))?;
    let test = read_dataset(&a.test)?;
    let mut scratch = w.scratch();
    let mut out = output(a.out.as_deref())?;
    for x in test.features() {
        let (ranked, _) = w.scores_with(x, a.topk, &mut scratch);
        writeln!(out, "{}", format_ranked(&ranked))?;
    }
    out.flush()?;
    Ok(())
}

fn check_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks.contains(&0) {
        bail!(UsageError("--k needs positive integers, e.g. 1,3,5".into()));
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    check_ks(&a.k)?;
    let idx = load_model(&a.model, "eval")?;
    let base = hyper_params(&a.hp, &idx)?;
    let test = read_dataset(&a.test)?;
    let workers = default_workers(a.workers);
    let opts = options(&a.hp);
    let run = |hp: &HyperParams| -> Result<EvalReport> {
        Ok(evaluate(&idx, &test, hp, &a.k, workers, opts, a.latency)?.report)
    };

    if !a.grid {
        let report = run(&base)?;
        if a.json {
            emit(&report.to_json())?;
        } else {
            emit_raw(&report.to_table())?;
        }
        if let Some(path) = &a.out {
            std::fs::write(path, report.to_json())
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        return Ok(());
    }

    let mut reports = Vec::new();
    for (alpha, beta) in ALPHA_BETA_GRID {
        reports.push(run(&HyperParams {
            alpha,
            beta,
            ..base
        })?);
    }
    let primary_k = *a.k.iter().min().expect("checked non-empty");
    let best = reports
        .iter()
        .fold(None::<&EvalReport>, |acc, r| match acc {
            Some(b) if b.precision_at[&primary_k] >= r.precision_at[&primary_k] => Some(b),
            _ => Some(r),
        })
        .expect("grid is non-empty")
        .hyper_params;
    for s in S_GRID {
        reports.push(run(&HyperParams { s, ..best })?);
    }

    if a.json {
        emit(&serde_json::to_string_pretty(&reports)?)?;
    } else {
        emit_raw(&grid_table(&reports))?;
    }
    if let Some(path) = &a.out {
        std::fs::write(path, serde_json::to_string_pretty(&reports)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn grid_table(reports: &[EvalReport]) -> String {
    let mut s = format!("{:>5} {:>6} {:>5}", "S", "alpha", "beta");
    if let Some(r) = reports.first() {
        for k in r.precision_at.keys() {
            s.push_str(&format!(" {:>8}", format!("P@{k}")));
        }
    }
    s.push('\n');
    for r in reports {
        let hp = &r.hyper_params;
        s.push_str(&format!("{:>5} {:>6.1} {:>5}", hp.s, hp.alpha, hp.beta));
        for p in r.precision_at.values() {
            s.push_str(&format!(" {:>7.2}%", 100.0 * p));
        }
        s.push('\n');
    }
    s
}

fn score(a: ScoreArgs) -> Result<()> {
    check_ks(&a.k)?;
    let test = read_dataset(&a.test)?;
    let text = std::fs::read_to_string(&a.predictions)
        .with_context(|| format!("cannot read {}", a.predictions.display()))?;
    let mut rankings: Vec<Vec<(LabelId, f64)>> = Vec::with_capacity(test.num_entries());
    for (i, line) in text.lines().enumerate() {
        rankings.push(
            parse_ranked(line)
                .map_err(|e| anyhow::anyhow!("{}:{}: {e}", a.predictions.display(), i + 1))?,
        );
    }
    let truths: Vec<_> = test.labels().cloned().collect();
    let mut ks = a.k.clone();
    ks.sort_unstable();
    ks.dedup();
    let (precision, best) = score_predictions(&rankings, &truths, &ks)?;
    if a.json {
        let v = serde_json::json!({
            "n_test": truths.len(),
            "precision_at": precision,
            "max_precision_at": best,
        });
        emit(&serde_json::to_string_pretty(&v)?)?;
    } else {
        emit(&format!("{:<6} {:>10} {:>10}", "K", "P@K", "max P@K"))?;
        for (k, p) in &precision {
            emit(&format!(
                "{:<6} {:>9.2}% {:>9.2}%",
                k,
                100.0 * p,
                100.0 * best[k]
            ))?;
        }
    }
    Ok(())
}

fn parse_synthetic(arg: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = arg
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| UsageError(format!("--synthetic expects N,D,NNZ, got {arg:?}")))?;
    match parts[..] {
        [n, d, nnz] if n > 0 && d > 0 && nnz > 0 => Ok((n, d, nnz)),
        _ => bail!(UsageError(format!(
            "--synthetic expects three positive integers, got {arg:?}"
        ))),
    }
}

fn bench(a: BenchArgs) -> Result<()> {
    let build_start = Instant::now();
    let (idx, queries) = if let Some(arg) = &a.synthetic {
        let (n, d, nnz) = parse_synthetic(arg)?;
        let cfg = SyntheticConfig {
            num_entries: n,
            num_features: d,
            num_labels: (n / 10).max(1),
            nnz: (nnz, nnz),
            labels_per_entry: (1, 5),
            topics: 0,
            integer_values: false,
            seed: a.seed,
        };
        let idx = TrainingIndex::build(&cfg.generate());
        let q = SyntheticConfig {
            num_entries: a.queries.unwrap_or(1000),
            seed: a.seed.wrapping_add(1),
            ..cfg
        }
        .generate();
        (idx, q.features().cloned().collect::<Vec<_>>())
    } else {
        let Some(test) = &a.test else {
            bail!(UsageError(
                "`bench` needs --test (or --synthetic N,D,NNZ)".into()
            ));
        };
        let idx = load_model(&a.model, "bench")?;
        let mut q: Vec<SparseVector> = read_dataset(test)?.features().cloned().collect();
        if let Some(n) = a.queries {
            q.truncate(n);
        }
        (idx, q)
    };
    let build_secs = build_start.elapsed().as_secs_f64();
    let hp = hyper_params(&a.hp, &idx)?;
    let report = benchmark(&idx, &queries, &hp, options(&a.hp))?;
    if a.json {
        emit(&serde_json::to_string_pretty(&report)?)?;
    } else {
        emit(&format!("load/build:         {build_secs:.2} s"))?;
        emit_raw(&report.to_table())?;
        emit(&format!(
            "n*d for comparison: {}",
            report.num_entries as u128 * report.num_features as u128
        ))?;
    }
    Ok(())
}

fn kernel_check(a: KernelCheckArgs) -> Result<()> {
    if a.sample == 0 || a.sample > GRAM_CAP {
        bail!(UsageError(format!("--sample must be in 1..={GRAM_CAP}")));
    }
    let d = read_dataset(&a.train)?;
    let pool: Vec<&SparseVector> = d.features().filter(|x| !x.is_empty()).collect();
    if pool.is_empty() {
        bail!("dataset has no non-empty feature vectors");
    }
    let k = a.sample.min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut worst = vec![f64::INFINITY; a.betas.len()];
    for _ in 0..a.rounds.max(1) {
        let picked: Vec<SparseVector> = sample(&mut rng, pool.len(), k)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect();
        for (w, &beta) in worst.iter_mut().zip(&a.betas) {
            *w = w.min(gram_min_eigenvalue(&picked, beta)?);
        }
    }
    emit(&format!(
        "{:>5} {:>16} {:>6}",
        "beta", "min eigenvalue", "psd"
    ))?;
    let mut ok = true;
    for (w, beta) in worst.iter().zip(&a.betas) {
        let psd = *w >= -1e-8;
        ok &= psd;
        emit(&format!(
            "{beta:>5} {w:>16.3e} {:>6}",
            if psd { "yes" } else { "NO" }
        ))?;
    }
    if !ok {
        bail!("Gram matrix with a negative eigenvalue below -1e-8");
    }
    Ok(())
}
