use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use neuroloop::frame::LiveMode;
use neuroloop::metrics::BudgetSpec;

use crate::commands;
use crate::service::{self, ServeOptions, DEFAULT_BIND};

#[derive(Debug, Parser)]
#[command(name = "neuroloop", version, about = "Closed-loop spiking decoder simulator")]
pub struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for models, logs and summaries.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Pace sessions at the decoder rate instead of running flat out.
    #[arg(long, global = true)]
    pub realtime: bool,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ServeMode {
    Hand,
    Neural,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run the passive/assisted training paradigm and write both decoders.
    Train,
    /// Scripted hand versus neural control with a trained decoder.
    Benchmark {
        /// Decoder file; defaults to the final model in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Print the implant data-rate and power budget.
    Budget {
        #[arg(long, default_value_t = 100.0)]
        electrodes: f64,
        /// Sampling rate, Hz.
        #[arg(long, default_value_t = 20_000.0)]
        fs: f64,
        #[arg(long, default_value_t = 12.0)]
        bits: f64,
        #[arg(long, default_value_t = 6.0)]
        dof: f64,
        #[arg(long, default_value_t = 10.0)]
        cmd_bits: f64,
        /// Command rate, Hz.
        #[arg(long, default_value_t = 50.0)]
        cmd_rate: f64,
    },
    /// Live WebSocket session server.
    Serve {
        #[arg(long, default_value = DEFAULT_BIND)]
        bind: String,
        #[arg(long, value_enum, default_value_t = ServeMode::Hand)]
        mode: ServeMode,
        #[arg(long, default_value_t = 10)]
        trials: u32,
        /// Decoder for neural sessions (and shadow decoding in hand sessions).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Start the first session immediately instead of waiting for a client.
        #[arg(long)]
        autostart: bool,
    },
    /// Rebuild summary tables from the benchmark logs in the output directory.
    Report,
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = commands::load_config(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Cmd::Train => {
            let outcome = commands::train(&cfg, &cli.out, cli.realtime)?;
            print!("{}", commands::train_report(&outcome));
            println!("wrote {} files to {}", outcome.files.len(), cli.out.display());
        }
        Cmd::Benchmark { model } => {
            let model = model.unwrap_or_else(|| cli.out.join(commands::MODEL_FINAL));
            let outcome = commands::benchmark(&cfg, &model, &cli.out, cli.realtime)?;
            print!("{}", commands::summary_table(&outcome.summary));
        }
        Cmd::Budget {
            electrodes,
            fs,
            bits,
            dof,
            cmd_bits,
            cmd_rate,
        } => {
            let spec = BudgetSpec {
                electrodes,
                sampling: fs,
                adc_bits: bits,
                dof,
                cmd_bits,
                cmd_rate,
                ..BudgetSpec::default()
            };
            let (_, table) = commands::budget_table(&spec)?;
            print!("{table}");
        }
        Cmd::Serve {
            bind,
            mode,
            trials,
            model,
            autostart,
        } => {
            let mut opts = ServeOptions::new(&cfg);
            opts.bind = bind;
            opts.mode = match mode {
                ServeMode::Hand => LiveMode::Hand,
                ServeMode::Neural => LiveMode::Neural,
            };
            opts.trials = trials;
            opts.model = model.as_deref().map(commands::load_model).transpose()?;
            opts.autostart = autostart;
            opts.out = Some(cli.out.clone());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let handle = service::start(cfg, opts).await?;
                println!("listening on ws://{}", handle.local_addr());
                tokio::signal::ctrl_c().await?;
                handle.shutdown().await;
                anyhow::Ok(())
            })?;
        }
        Cmd::Report => {
            let (summary, files) = commands::report(&cfg, &cli.out)?;
            print!("{}", commands::summary_table(&summary));
            for f in files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}
