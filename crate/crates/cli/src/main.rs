use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use reopt_core::model::instantiate;
use reopt_core::model::lp::write_lp;
use reopt_core::patch::DiffEntry;
use reopt_core::scenario::{load_catalog, Scenario};
use reopt_core::toolbox::Strategy;
use reopt_service::session::solve_state;
use reopt_service::{
    compute_report, replay, router, PlannerKind, PromptOptions, ReplayOptions, Service, ServiceConfig, Session, Store,
    Variant,
};

#[derive(Parser)]
#[command(name = "reopt", version, about = "Interactive re-optimization of MIP models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario's baseline and print the result.
    Solve {
        scenario: String,
        #[arg(long)]
        json: bool,
    },
    /// Run one closed-loop step on a scenario or a stored session.
    Prompt {
        /// Scenario name or path, or a session id when --store is given.
        target: String,
        delta: String,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value = "mock")]
        planner: PlannerKind,
        /// `auto` lets the selector decide.
        #[arg(long, default_value = "auto")]
        strategy: String,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Replay a prompt catalog, each prompt against the baseline.
    Replay {
        scenario: String,
        catalog: String,
        /// Repeat to run several variants.
        #[arg(long, default_values = ["patch"])]
        variant: Vec<Variant>,
        #[arg(long, default_value = "mock")]
        planner: PlannerKind,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Also write report.json and report.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        store: Option<PathBuf>,
        /// Built UI bundle to serve under /ui/.
        #[arg(long)]
        ui: Option<PathBuf>,
        #[arg(long, default_value = "mock")]
        planner: PlannerKind,
    },
    /// Print a scenario's instance in LP format.
    ExportLp { scenario: String },
}

fn load(spec: &str) -> Result<Scenario> {
    Scenario::load(spec).map_err(|e| anyhow!("{e}"))
}

fn fmt_obj(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x:.1}"))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { scenario, json } => {
            let sc = load(&scenario)?;
            let r = solve_state(&sc.state).map_err(|e| anyhow!(e))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!("status: {:?}", r.status);
                println!("objective: {}", fmt_obj(r.objective));
                println!("time: {:.3}s  nodes: {}", r.wall_time, r.node_count);
                for (k, v) in r.assignment.iter().flatten().filter(|(_, v)| v.abs() > 1e-9) {
                    println!("  {k} = {v}");
                }
            }
            Ok(r.objective.is_some())
        }
        Command::Prompt { target, delta, budget, planner, strategy, store, json } => {
            let strategy = match strategy.as_str() {
                "auto" => None,
                s => Some(s.parse::<Strategy>().map_err(|e| anyhow!(e))?),
            };
            let opts = PromptOptions { budget, strategy, planner: Some(planner), ..Default::default() };
            let store = store.map(Store::open).transpose()?;
            let mut session = match &store {
                Some(st) if st.path_of(&target).exists() => st.restore_session(&target)?.0,
                _ => {
                    let sc = load(&target)?;
                    let id = uuid::Uuid::new_v4().simple().to_string();
                    let s = Session::create(id, target.clone(), sc)?;
                    if let Some(st) = &store {
                        st.persist_created(&s)?;
                        eprintln!("session: {}", s.id);
                    }
                    s
                }
            };
            let before = session.latest_solution().and_then(|r| r.objective);
            let event = session.prompt(&delta, &opts, planner)?;
            if let Some(st) = &store {
                st.persist_event(&session.id, &event)?;
            }
            let o = &event.outcome;
            if json {
                println!("{}", serde_json::to_string_pretty(o)?);
            } else {
                println!("status: {:?}  attempts: {}", o.status, o.attempts_used);
                if let Some(s) = &o.strategy {
                    println!("strategy: {} ({})", s.solve_strategy, s.rationale);
                }
                if let Some(p) = &o.planner_output {
                    println!("summary: {}", p.edit_summary);
                }
                println!("objective: {} -> {}", fmt_obj(before), fmt_obj(o.objective()));
                println!("version: {} -> {}", event.from_version, o.new_state_version);
                for e in o.diff.iter().flat_map(|d| &d.entries) {
                    println!("  {}", diff_line(e));
                }
                for f in &o.failures {
                    println!("failure [{}] {}: {}", f.failure_stage, f.failure_kind, f.failure_message);
                }
            }
            Ok(o.succeeded())
        }
        Command::Replay { scenario, catalog, variant, planner, budget, format, out } => {
            let sc = load(&scenario)?;
            let items = load_catalog(&catalog).map_err(|e| anyhow!("{e}"))?;
            let opts = ReplayOptions { variants: variant, planner, budget };
            let report = compute_report(&replay(&sc, &items, &opts)?);
            match format {
                Format::Text => print!("{}", report.to_text()),
                Format::Json => println!("{}", report.to_json()),
                Format::Csv => print!("{}", report.to_csv()),
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
                std::fs::write(dir.join("report.json"), report.to_json())?;
                std::fs::write(dir.join("report.csv"), report.to_csv())?;
            }
            if !report.is_nested() {
                bail!("report violates the criteria nesting");
            }
            Ok(true)
        }
        Command::Serve { port, host, store, ui, planner } => {
            let (svc, restored) = Service::open(ServiceConfig { store_dir: store, ui_dir: ui, planner })?;
            for r in &restored {
                eprintln!("restored {} ({} records{})", r.session, r.records, if r.truncated { ", truncated tail dropped" } else { "" });
            }
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad --host/--port")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("listening on http://{addr}");
                axum::serve(listener, router(svc)).await
            })?;
            Ok(true)
        }
        Command::ExportLp { scenario } => {
            let sc = load(&scenario)?;
            let inst = instantiate(&sc.state).map_err(|e| anyhow!("{e}"))?;
            print!("{}", write_lp(&inst));
            Ok(true)
        }
    }
}

fn diff_line(e: &DiffEntry) -> String {
    let show = |v: &Option<serde_json::Value>| v.as_ref().map_or_else(|| "(absent)".to_string(), |v| v.to_string());
    format!("{}: {} -> {}", e.path, show(&e.before), show(&e.after))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    // clap exits with 2 on usage errors by itself.
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
