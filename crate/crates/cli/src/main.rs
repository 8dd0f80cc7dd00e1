use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use crystwin_core::bisim::{lockstep_run, LockstepOptions, Verdict};
use crystwin_core::bridge::enc;
use crystwin_core::comp::Env;
use crystwin_core::harness::props::{self, detecting_suite};
use crystwin_core::harness::{case_seed, Case, PropConfig, DEFAULT_CASES, DEFAULT_SEED};
use crystwin_core::mono;
use crystwin_core::store::{AddrVal, ByteStore};
use crystwin_core::syntax::{parse_contract, parse_schedule, BlockSchedule, Contract, Scope};
use crystwin_core::system::{self, LocalOrder, RunOptions, StepRecord, SystemConfig};
use crystwin_core::Fault;

#[derive(Parser)]
#[command(
    name = "crystwin",
    version,
    about = "Run Crystality contracts under two semantics and compare them"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Semantics {
    Comp,
    Mono,
    Both,
}

#[derive(clap::Args)]
struct Shape {
    /// Number of engines. Defaults to the largest engine index in the schedule's bindings.
    #[arg(long)]
    engines: Option<usize>,
    /// Address slots per engine. Defaults to the largest slot index in the bindings.
    #[arg(long)]
    slots: Option<usize>,
    /// Stop after this many blocks instead of draining pending relays.
    #[arg(long)]
    max_blocks: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a schedule and print the final state.
    Run {
        contract: PathBuf,
        schedule: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        semantics: Semantics,
        #[command(flatten)]
        shape: Shape,
        /// Local interleaving for the compositional run.
        #[arg(long, default_value = "round-robin")]
        order: LocalOrder,
        /// Print one line per transaction step.
        #[arg(long)]
        trace: bool,
        /// Print the full final configuration.
        #[arg(long)]
        dump_config: bool,
    },
    /// Run both semantics in lockstep and report the first divergence.
    CheckBisim {
        contract: PathBuf,
        schedule: PathBuf,
        #[command(flatten)]
        shape: Shape,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
    /// Run the property suites on generated contracts.
    Props {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_CASES)]
        cases: usize,
        /// Run only the named suite.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
    /// Generate contracts and check them in lockstep until the time budget runs out.
    Fuzz {
        #[arg(long, default_value_t = 10)]
        seconds: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
}

enum Failure {
    Usage(String),
    Check(String),
}

type CmdResult = Result<String, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Run {
            contract,
            schedule,
            semantics,
            shape,
            order,
            trace,
            dump_config,
        } => cmd_run(
            &contract,
            &schedule,
            semantics,
            &shape,
            order,
            trace,
            dump_config,
        ),
        Command::CheckBisim {
            contract,
            schedule,
            shape,
            inject_fault,
        } => cmd_check_bisim(&contract, &schedule, &shape, inject_fault),
        Command::Props {
            seed,
            cases,
            suite,
            inject_fault,
        } => cmd_props(seed_from_env(seed), cases, suite.as_deref(), inject_fault),
        Command::Fuzz {
            seconds,
            seed,
            inject_fault,
        } => cmd_fuzz(
            seed_from_env(seed),
            Duration::from_secs(seconds),
            inject_fault,
        ),
    };
    match res {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Check(out)) => {
            print!("{out}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn seed_from_env(flag: Option<u64>) -> u64 {
    std::env::var("CRYSTWIN_SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .or(flag)
        .unwrap_or(DEFAULT_SEED)
}

fn load(contract: &Path, schedule: &Path) -> Result<(Contract, BlockSchedule), Failure> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
    };
    let c = parse_contract(&read(contract)?)
        .map_err(|e| Failure::Usage(format!("{}: {e}", contract.display())))?;
    let s = parse_schedule(&read(schedule)?, &c)
        .map_err(|e| Failure::Usage(format!("{}: {e}", schedule.display())))?;
    Ok((c, s))
}

fn shape_of(s: &BlockSchedule, shape: &Shape) -> Result<(usize, usize), Failure> {
    let n = shape
        .engines
        .unwrap_or_else(|| s.bindings.values().map(|a| a.engine).max().unwrap_or(1));
    let k = shape
        .slots
        .unwrap_or_else(|| s.bindings.values().map(|a| a.slot).max().unwrap_or(1));
    if n == 0 || k == 0 {
        return Err(Failure::Usage("engines and slots must be positive".into()));
    }
    Ok((n, k))
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

/// One line per state variable: address variables by binding name (or
/// `(r, j)` when unnamed), engine variables by engine, globals alone.
fn summary(
    c: &Contract,
    s: &BlockSchedule,
    n: usize,
    k: usize,
    slot: impl Fn(usize, usize) -> ByteStore,
    engine: impl Fn(usize) -> ByteStore,
    g: &ByteStore,
) -> String {
    let mut out = String::new();
    for v in &c.state_vars {
        match v.scope {
            Scope::Address => {
                let mut cells: Vec<(String, String)> = Vec::new();
                for r in 1..=n {
                    for j in 1..=k {
                        let name = s
                            .name_of(AddrVal::new(r, j))
                            .map_or_else(|| format!("({r},{j})"), str::to_string);
                        if let Ok(val) = slot(r, j).read(&v.name) {
                            cells.push((name, val.to_string()));
                        }
                    }
                }
                cells.sort();
                let cells: Vec<String> =
                    cells.into_iter().map(|(a, b)| format!("{a}={b}")).collect();
                let _ = writeln!(out, "{} {}", v.name, cells.join(" "));
            }
            Scope::Engine => {
                let cells: Vec<String> = (1..=n)
                    .filter_map(|r| {
                        engine(r)
                            .read(&v.name)
                            .ok()
                            .map(|val| format!("engine[{r}]={val}"))
                    })
                    .collect();
                let _ = writeln!(out, "{} {}", v.name, cells.join(" "));
            }
            Scope::Global => {
                if let Ok(val) = g.read(&v.name) {
                    let _ = writeln!(out, "{}={val}", v.name);
                }
            }
        }
    }
    out
}

fn comp_summary(c: &Contract, s: &BlockSchedule, cfg: &SystemConfig) -> String {
    let k = cfg.engines.first().map_or(0, |e| e.state.k());
    summary(
        c,
        s,
        cfg.n(),
        k,
        |r, j| cfg.engine(r).state.slot(j).clone(),
        |r| cfg.engine(r).state.engine.clone(),
        &cfg.global.state.g,
    )
}

fn cmd_run(
    contract: &Path,
    schedule: &Path,
    semantics: Semantics,
    shape: &Shape,
    order: LocalOrder,
    trace: bool,
    dump_config: bool,
) -> CmdResult {
    let (c, s) = load(contract, schedule)?;
    let (n, k) = shape_of(&s, shape)?;
    let env = Env::new(&c, n, k);
    let mut out = String::new();

    let comp_final = if semantics != Semantics::Mono {
        let mut cfg = system::deploy(&c, n, k).map_err(usage)?;
        system::apply_inits(&mut cfg, &s.inits).map_err(usage)?;
        let mut lines = Vec::new();
        let opts = RunOptions {
            order,
            max_blocks: shape.max_blocks,
        };
        let res = system::run_schedule(
            &cfg,
            &s.blocks,
            &env,
            opts,
            &mut |rec: &StepRecord, post: &SystemConfig| {
                if trace {
                    lines.push(rec.trace_line(&post.hash(), false));
                }
            },
        )
        .map_err(usage)?;
        if trace {
            out.push_str("trace comp:\n");
            for l in &lines {
                let _ = writeln!(out, "  {l}");
            }
        }
        let _ = writeln!(
            out,
            "comp: blocks={} steps={} aborted={}",
            res.blocks, res.steps, res.aborted
        );
        Some(res.config)
    } else {
        None
    };

    let mono_final = if semantics != Semantics::Comp {
        let mut cfg = mono::deploy(&c, n, k).map_err(usage)?;
        mono::apply_inits(&mut cfg, &s.inits).map_err(usage)?;
        let mut lines = Vec::new();
        let res = mono::run_schedule(
            &cfg,
            &s.blocks,
            &env,
            shape.max_blocks,
            &mut |rec: &StepRecord, post: &mono::MonoConfig| {
                if trace {
                    lines.push(rec.trace_line(&post.hash(), true));
                }
            },
        )
        .map_err(usage)?;
        if trace {
            out.push_str("trace mono:\n");
            for l in &lines {
                let _ = writeln!(out, "  {l}");
            }
        }
        let _ = writeln!(
            out,
            "mono: blocks={} steps={} aborted={}",
            res.blocks, res.steps, res.aborted
        );
        Some(res.config)
    } else {
        None
    };

    let mut agree = true;
    if let (Some(cc), Some(mc)) = (&comp_final, &mono_final) {
        agree = enc(mc).is_ok_and(|e| &e == cc);
        let _ = writeln!(out, "semantics agree: {}", if agree { "yes" } else { "no" });
    }
    if let Some(cc) = &comp_final {
        out.push_str(&comp_summary(&c, &s, cc));
    } else if let Some(mc) = &mono_final {
        out.push_str(&summary(
            &c,
            &s,
            n,
            k,
            |r, j| mc.engine(r).slot(j).clone(),
            |r| mc.engine(r).engine.clone(),
            &mc.g,
        ));
    }
    if dump_config {
        if let Some(cc) = &comp_final {
            out.push_str(&cc.dump());
        }
        if let Some(mc) = &mono_final {
            out.push_str(&mc.dump());
        }
    }
    if agree {
        Ok(out)
    } else {
        Err(Failure::Check(out))
    }
}

fn cmd_check_bisim(
    contract: &Path,
    schedule: &Path,
    shape: &Shape,
    fault: Option<Fault>,
) -> CmdResult {
    let (c, s) = load(contract, schedule)?;
    let (n, k) = shape_of(&s, shape)?;
    let mut opts = LockstepOptions::new(n, k);
    opts.max_blocks = shape.max_blocks;
    opts.fault = fault;
    let verdict = lockstep_run(&c, &s, &opts).map_err(usage)?;
    let out = verdict.to_string();
    match verdict {
        Verdict::Pass { .. } => Ok(out),
        Verdict::Diverged(_) => Err(Failure::Check(out)),
    }
}

fn cmd_props(seed: u64, cases: usize, suite: Option<&str>, fault: Option<Fault>) -> CmdResult {
    let cfg = PropConfig {
        seed,
        cases,
        ..PropConfig::default()
    }
    .with_fault(fault);
    let selected: Vec<_> = match (suite, fault) {
        (Some(name), _) => {
            let found: Vec<_> = props::ALL.iter().filter(|(n, _)| *n == name).collect();
            if found.is_empty() {
                let names: Vec<_> = props::ALL.iter().map(|(n, _)| *n).collect();
                return Err(Failure::Usage(format!(
                    "unknown suite `{name}`; known: {}",
                    names.join(", ")
                )));
            }
            found.into_iter().map(|(_, f)| *f).collect()
        }
        (None, Some(f)) => vec![detecting_suite(f)],
        (None, None) => props::ALL.iter().map(|(_, f)| *f).collect(),
    };
    let mut out = format!("props seed={seed} cases={cases}\n");
    let mut ok = true;
    for run in selected {
        let r = run(&cfg);
        ok &= r.passed();
        out.push_str(&r.to_string());
        eprintln!("{}: {:.2?}", r.name, r.wall);
    }
    if ok {
        Ok(out)
    } else {
        Err(Failure::Check(out))
    }
}

fn cmd_fuzz(seed: u64, budget: Duration, fault: Option<Fault>) -> CmdResult {
    let start = Instant::now();
    let mut runs = 0u64;
    let mut steps = 0usize;
    while start.elapsed() < budget {
        let case = Case::generate(case_seed(seed, runs), 4, 3);
        let mut opts = LockstepOptions::new(case.n(), case.k());
        opts.fault = fault;
        let verdict = lockstep_run(&case.contract, &case.schedule, &opts).map_err(usage)?;
        runs += 1;
        match verdict {
            Verdict::Pass { steps: s, .. } => steps += s,
            Verdict::Diverged(d) => {
                let mut out = format!(
                    "fuzz: divergence after {runs} run(s)\nseed: {}\n",
                    case.seed
                );
                out.push_str(&case.render());
                out.push_str(&d.to_string());
                return Err(Failure::Check(out));
            }
        }
    }
    Ok(format!(
        "fuzz: {runs} run(s), {steps} step(s), no divergence\n"
    ))
}
