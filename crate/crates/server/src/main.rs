use clap::Parser;
use std::path::PathBuf;
use std::time::Duration;
use telewaypoint_core::channel::ChannelConfig;
use telewaypoint_core::map::load_map;
use telewaypoint_core::session::SessionConfig;
use telewaypoint_server::headless::{bot_experiment, create_bot_session, export_store};
use telewaypoint_server::state::CreateSession;
use telewaypoint_server::store::{Mode, Store};
use telewaypoint_server::{router, AppState};

/// Teleoperation experiment server and headless runner.
#[derive(Parser, Debug)]
#[command(name = "telewaypoint", version)]
struct Cli {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Overridden by TELEWAYPOINT_DATA_DIR.
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    /// ASCII map to use instead of the shipped one.
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run bots without serving.
    #[arg(long)]
    headless: bool,
    /// Paired bot runs per cell; prints the trial CSV.
    #[arg(long, value_name = "N_RUNS")]
    bot_experiment: Option<usize>,
    /// Uplink delay in seconds for delayed trials.
    #[arg(long, value_name = "SECONDS")]
    delay_up: Option<f64>,
    /// Downlink delay in seconds for delayed trials.
    #[arg(long, value_name = "SECONDS")]
    delay_down: Option<f64>,
    /// Write combined results, questionnaires and report CSVs into this directory.
    #[arg(long, value_name = "PATH")]
    export: Option<PathBuf>,
}

fn seconds(s: f64) -> Result<Duration, String> {
    Duration::try_from_secs_f64(s).map_err(|e| format!("bad delay {s}: {e}"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cli = Cli::parse();
    let data_dir = std::env::var_os("TELEWAYPOINT_DATA_DIR").map(PathBuf::from).unwrap_or(cli.data_dir.clone());
    let store = Store::new(&data_dir);

    if let Some(path) = &cli.export {
        let bundle = export_store(&store)?;
        std::fs::create_dir_all(path)?;
        std::fs::write(path.join("results.csv"), &bundle.results_csv)?;
        std::fs::write(path.join("questionnaires.csv"), &bundle.questionnaires_csv)?;
        match &bundle.report_csv {
            Some(r) => std::fs::write(path.join("report.csv"), r)?,
            None => eprintln!("no analysis report: {}", bundle.report_error.unwrap_or_default()),
        }
        return Ok(());
    }

    let map = match &cli.map {
        Some(p) => {
            let grid = load_map(&std::fs::read_to_string(p)?)?;
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "custom".into());
            Some((name, grid))
        }
        None => None,
    };
    let link = if cli.delay_up.is_some() || cli.delay_down.is_some() {
        Some(ChannelConfig {
            uplink_delay: seconds(cli.delay_up.unwrap_or(0.0))?,
            downlink_delay: seconds(cli.delay_down.unwrap_or(0.0))?,
            jitter: None,
        })
    } else {
        None
    };
    let state = AppState::new(store, map, link);

    if let Some(runs) = cli.bot_experiment {
        let grid = state.0.maps[&state.0.default_map].clone();
        let mut config = SessionConfig::for_map(&grid);
        if let Some(l) = link {
            config.delayed_link = l;
        }
        let (csv, summary) = bot_experiment(&grid, config, cli.seed, runs)?;
        print!("{csv}");
        eprintln!(
            "runs {}: direct delay ratio {:.3}, waypoint delay ratio {:.3}, direct worse in {}/{}",
            summary.runs, summary.direct_ratio, summary.waypoint_ratio, summary.paired_wins, summary.runs
        );
        return Ok(());
    }

    for (id, why) in state.load_existing()? {
        eprintln!("skipping stored session {id}: {why}");
    }

    if cli.headless {
        let order = if cli.seed % 2 == 0 { "DCFirst" } else { "WCFirst" };
        let req = CreateSession { map: None, order: order.into(), seed: cli.seed, participant: None, mode: Mode::Bot };
        let id = create_bot_session(&state, &req)?;
        eprintln!("session {id} stored under {}", state.store().session_dir(&id).display());
        print!("{}", state.store().read(&id, telewaypoint_server::store::RESULTS_FILE)?);
        return Ok(());
    }

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", cli.port)).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}
