//! Command-line interface: batch `assess` and the `serve` HTTP server.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use facetlit_core::config::{AppConfig, BackendConfig};
use facetlit_core::corpus::RelevanceCategory;
use facetlit_core::document::FacetType;
use facetlit_core::session::{AssessRequest, ServiceError, Service};

#[derive(Debug, Parser)]
#[command(name = "facetlit", version, about = "Literature-grounded feedback on research ideas")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a corpus for an idea, assess each facet, and write a report.
    Assess(AssessArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Maximum number of seed papers.
    #[arg(long)]
    pub corpus_cap: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Directory holding session state.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Answer every model call from this mock script.
    #[arg(long)]
    pub mock_script: Option<PathBuf>,
    /// Answer scholarly lookups from this recorded backend fixture.
    #[arg(long)]
    pub backend_fixture: Option<PathBuf>,
    /// Append gateway audit records to this file.
    #[arg(long)]
    pub audit_file: Option<PathBuf>,
    #[arg(long)]
    pub allow_add_paper: bool,
}

impl Overrides {
    pub fn resolve(&self) -> anyhow::Result<AppConfig> {
        let mut c = match &self.config {
            Some(path) => AppConfig::load(path)?,
            None => AppConfig::default(),
        };
        if let Some(n) = self.corpus_cap {
            c.corpus.seed_limit = n;
        }
        if let Some(d) = &self.cache_dir {
            c.cache_dir = Some(d.clone());
        }
        if let Some(d) = &self.data_dir {
            c.data_dir = d.clone();
        }
        if let Some(p) = &self.mock_script {
            c.mock_script = Some(p.clone());
        }
        if let Some(p) = &self.backend_fixture {
            c.backend = BackendConfig::Recorded { path: p.clone() };
        }
        if let Some(p) = &self.audit_file {
            c.audit_file = Some(p.clone());
        }
        c.allow_add_paper |= self.allow_add_paper;
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct AssessArgs {
    /// Idea text.
    #[arg(long, conflicts_with = "idea_file")]
    pub idea: Option<String>,
    /// File holding the idea text.
    #[arg(long)]
    pub idea_file: Option<PathBuf>,
    /// Papers to assess against. Defaults to the top-ranked relevant papers.
    #[arg(long = "select")]
    pub select: Vec<String>,
    /// How many top-ranked papers to select when `--select` is absent.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    /// Also run the full assessment with an overall summary.
    #[arg(long)]
    pub full: bool,
    /// Researcher guidance passed to every checker.
    #[arg(long)]
    pub steering: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Run the batch flow and return the rendered report.
pub fn assess(args: &AssessArgs) -> anyhow::Result<String> {
    let idea = match (&args.idea, &args.idea_file) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        (None, None) => bail!("pass --idea or --idea-file"),
    };
    let config = args.overrides.resolve()?;
    let svc = Service::from_config(&config)?;
    let session = svc.create_session(idea.trim())?;
    let id = session.session_id.clone();
    eprintln!("session {id}: {} papers", session.corpus.len());
    for w in &session.warnings {
        eprintln!("warning: {w}");
    }

    let selection: Vec<String> = if args.select.is_empty() {
        session
            .ranking
            .entries
            .iter()
            .filter(|e| e.category != RelevanceCategory::NotRelevant)
            .take(args.top)
            .map(|e| e.paper_id.clone())
            .collect()
    } else {
        args.select.clone()
    };
    if selection.is_empty() {
        bail!("no relevant papers to assess against");
    }
    svc.select(&id, &selection, true)?;

    for facet in FacetType::ALL {
        let req = AssessRequest { facet, segment_id: None, steering: args.steering.clone() };
        match svc.run_assessment(&id, &req) {
            Ok(r) => eprintln!("{facet}: assessment {}", r.assessment_id),
            Err(ServiceError::NothingToAssess(_)) => eprintln!("{facet}: missing from the idea"),
            Err(e) => eprintln!("{facet}: not assessed: {e}"),
        }
    }
    if args.full {
        svc.full_assessment(&id, args.steering.clone())?;
    }
    let report = svc.export_report(&id)?;
    if let Some(out) = &args.out {
        std::fs::write(out, &report).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(report)
}

pub async fn serve(args: &ServeArgs) -> anyhow::Result<()> {
    let config = args.overrides.resolve()?;
    let svc = Arc::new(Service::from_config(&config)?);
    let listener = tokio::net::TcpListener::bind(&args.addr).await.with_context(|| format!("binding {}", args.addr))?;
    log::info!("listening on {}", args.addr);
    axum::serve(listener, crate::app(svc)).await?;
    Ok(())
}
