use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Result;
use clap::{Parser, Subcommand};
use mkg_core::qa::{item_card, Session};
use mkg_core::storyboard::{generate_storyboard, PathSelector};
use mkg_service::{build_state, serve, ServiceConfig};

/// Live assistant over a product knowledge graph.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Service config JSON; relative paths inside resolve against its folder.
    #[arg(long, global = true, default_value = "service.json")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve,
    /// Rank items for a query.
    Search {
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Storyboard JSON for an item.
    Storyboard {
        #[arg(long)]
        item: String,
        /// Index into the item's sorted cognitive paths.
        #[arg(long, conflicts_with = "via")]
        path: Option<usize>,
        /// Entity id the chosen path must pass through.
        #[arg(long)]
        via: Option<String>,
    },
    /// Item card JSON.
    Card {
        #[arg(long)]
        item: String,
    },
    /// Answer queries in one session, read one per line from stdin.
    Chat {
        /// Item to select before the first query.
        #[arg(long)]
        item: Option<String>,
    },
}

fn main() -> Result<()> {
    mkg_cli::init_logging();
    let args = Args::parse();
    let config = ServiceConfig::load(&args.config)?;
    if let Command::Serve = args.command {
        let rt = tokio::runtime::Runtime::new()?;
        return Ok(rt.block_on(serve(config))?);
    }
    let state = Arc::new(build_state(&config)?);
    let engine = &state.engine;
    match args.command {
        Command::Serve => unreachable!(),
        Command::Search { q, k } => mkg_cli::print_json(&engine.search(&q, k)?),
        Command::Storyboard { item, path, via } => {
            let selector = match (path, via) {
                (Some(n), _) => PathSelector::Nth(n),
                (None, Some(v)) => PathSelector::Through(v),
                (None, None) => PathSelector::First,
            };
            mkg_cli::print_json(&generate_storyboard(&engine.kg, &item, &selector, &state.story_templates)?)
        }
        Command::Card { item } => mkg_cli::print_json(&item_card(&engine.kg, &item)?),
        Command::Chat { item } => {
            let mut session = Session::new("cli");
            if let Some(item) = item {
                session.select(&engine.kg, &item)?;
            }
            for line in std::io::stdin().lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let r = engine.handle(&line, &mut session)?;
                println!("{}", serde_json::to_string(&r)?);
            }
            Ok(())
        }
    }
}
