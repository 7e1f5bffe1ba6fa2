//! `survey`: compute priors, score responses, run experiments, chat, serve.
//!
//! Exit codes: 0 ok, 1 usage, 2 data error, 3 external-service error.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use survey_core::actions::{IntentClassifier, KeywordClassifier, LlmIntentClassifier};
use survey_core::config::{GeneratorMode, Settings};
use survey_core::corpus;
use survey_core::engine::{
    Engine, LlmQuestionGenerator, PolicyKind, QuestionGenerator, SessionConfig, SessionStatus, TemplateGenerator,
    QUIT_COMMAND,
};
use survey_core::llm::{ChatModel, HttpChatModel};
use survey_core::lsde::{LsdeScorer, RuleSpecificityDetector, VaderScorer};
use survey_core::policy::{compute_priors, read_ev_table, write_ev_table, EpsilonSchedule, EvTable};
use survey_core::sim::{self, ExperimentDesign, LlmUser, PersonaUsers, Profile, SimulatedUser};
use survey_core::Error;

#[derive(Parser, Debug)]
#[command(name = "survey", version, about = "Adaptive conversational survey tools")]
struct Cli {
    /// Flat key = value configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    /// -v info, -vv debug, -vvv trace (logs go to stderr).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the 25-cell EV table from a conversation log or a pairs file.
    Priors {
        /// JSONL conversation log, or a TSV of exchange pairs.
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "keyword")]
        classifier: ClassifierKind,
    },
    /// Print the quality breakdown of a response.
    Score {
        /// Text to score; read from stdin when absent.
        text: Option<String>,
    },
    /// Run the controlled experiment with simulated users.
    Simulate {
        /// `standard` (4 x 4 x 5), `quick` (one repetition) or a JSON design file.
        #[arg(long, default_value = "standard")]
        design: String,
        #[arg(long, value_enum, default_value = "scripted")]
        users: UsersKind,
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Directory for report.json, report.txt and transcripts.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer survey questions in the terminal. Type /quit to stop.
    Chat {
        #[arg(long)]
        generator: Option<GeneratorMode>,
        /// `0.3`, `fixed:0.3` or `decay:start:end:horizon`.
        #[arg(long)]
        epsilon: Option<EpsilonSchedule>,
        #[arg(long)]
        horizon: Option<u32>,
        #[arg(long)]
        prior: Option<PathBuf>,
        #[arg(long)]
        topic: Option<String>,
        #[arg(long)]
        baseline: bool,
        /// Print state, action and EV after each answer.
        #[arg(long)]
        show_policy: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        prior: Option<PathBuf>,
        #[arg(long)]
        generator: Option<GeneratorMode>,
    },
    /// Descriptive statistics of a cleaned conversation log.
    Stats { input: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClassifierKind {
    Keyword,
    Llm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UsersKind {
    Scripted,
    Llm,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    External(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Llm(_) => Failure::External(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::External(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::External(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        2 => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message().lines().next().unwrap_or_default());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut settings = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    if cli.seed.is_some() {
        settings.seed = cli.seed;
    }
    let ctx = Ctx { settings, json: cli.json };
    match cli.command {
        Command::Priors { input, output, classifier } => ctx.priors(&input, &output, classifier),
        Command::Score { text } => ctx.score(text),
        Command::Simulate { design, users, reps, workers, prior, out } => {
            ctx.simulate(&design, users, reps, workers, prior, out)
        }
        Command::Chat { generator, epsilon, horizon, prior, topic, baseline, show_policy } => {
            let mut ctx = ctx;
            if generator.is_some() {
                ctx.settings.generator = generator;
            }
            if epsilon.is_some() {
                ctx.settings.epsilon = epsilon;
            }
            if horizon.is_some() {
                ctx.settings.horizon = horizon;
            }
            if prior.is_some() {
                ctx.settings.prior_table = prior;
            }
            ctx.chat(topic, baseline, show_policy)
        }
        Command::Serve { bind, prior, generator } => {
            let mut ctx = ctx;
            if bind.is_some() {
                ctx.settings.bind = bind;
            }
            if prior.is_some() {
                ctx.settings.prior_table = prior;
            }
            if generator.is_some() {
                ctx.settings.generator = generator;
            }
            ctx.serve()
        }
        Command::Stats { input } => ctx.stats(&input),
    }
}

struct Ctx {
    settings: Settings,
    json: bool,
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

impl Ctx {
    fn scorer(&self) -> Result<LsdeScorer, Failure> {
        let s = &self.settings;
        let vader = match &s.vader_lexicon {
            Some(p) => VaderScorer::from_lexicon_file(p)?,
            None => VaderScorer::new(),
        };
        let detector = if s.places_lexicon.is_some() || s.temporal_lexicon.is_some() {
            RuleSpecificityDetector::from_lexicon_files(s.places_lexicon.as_deref(), s.temporal_lexicon.as_deref())?
        } else {
            RuleSpecificityDetector::new()
        };
        Ok(LsdeScorer::new(Arc::new(vader), Arc::new(detector)).with_mode(s.scorer_mode.unwrap_or_default()))
    }

    fn chat_model(&self) -> Result<Arc<dyn ChatModel>, Failure> {
        Ok(Arc::new(HttpChatModel::new(self.settings.llm_config())?))
    }

    fn generator(&self) -> Result<Arc<dyn QuestionGenerator>, Failure> {
        Ok(match self.settings.generator.unwrap_or_default() {
            GeneratorMode::Templates => Arc::new(TemplateGenerator),
            GeneratorMode::Llm => Arc::new(LlmQuestionGenerator::new(self.chat_model()?)),
        })
    }

    /// The configured prior table, or the built-in reference one.
    fn prior(&self, path: Option<&Path>) -> Result<EvTable, Failure> {
        match path.or(self.settings.prior_table.as_deref()) {
            Some(p) => Ok(read_ev_table(p)?),
            None => Ok(EvTable::reference_prior()),
        }
    }

    fn engine(&self, prior: EvTable) -> Result<Engine, Failure> {
        Ok(Engine::new(Arc::new(prior), Arc::new(self.scorer()?), self.generator()?)?)
    }

    fn session_config(&self) -> SessionConfig {
        let s = &self.settings;
        let mut c = SessionConfig::default();
        if let Some(h) = s.horizon {
            c.horizon = h;
        }
        if let Some(a) = s.alpha {
            c.alpha = a;
        }
        if let Some(e) = s.epsilon {
            c.schedule = e;
        }
        c.seed = s.seed.unwrap_or(0);
        c
    }

    fn priors(&self, input: &Path, output: &Path, classifier: ClassifierKind) -> Outcome {
        let is_pairs = std::fs::read_to_string(input)
            .map_err(|e| Failure::Data(format!("{}: {e}", input.display())))?
            .lines()
            .next()
            .is_some_and(|l| l.starts_with("state\taction"));
        let pairs = if is_pairs {
            corpus::read_pairs(input)?
        } else {
            let raw = corpus::read_log(input)?;
            let cleaned = corpus::clean(&raw);
            tracing::info!(raw = raw.len(), kept = cleaned.len(), "log cleaned");
            let classifier: Box<dyn IntentClassifier> = match classifier {
                ClassifierKind::Keyword => Box::new(KeywordClassifier),
                ClassifierKind::Llm => Box::new(LlmIntentClassifier::new(self.chat_model()?)),
            };
            corpus::extract_pairs(&cleaned, &self.scorer()?, classifier.as_ref())?
        };
        if pairs.is_empty() {
            eprintln!("warning: {} has no exchange pairs; writing an all-zero table", input.display());
        }
        let table = compute_priors(&pairs);
        write_ev_table(output, &table)?;
        if self.json {
            print_json(&table.records());
        } else {
            print!("{}", table.render());
            println!("{} pairs -> {}", pairs.len(), output.display());
        }
        Ok(())
    }

    fn score(&self, text: Option<String>) -> Outcome {
        let text = match text {
            Some(t) => t,
            None => std::io::read_to_string(std::io::stdin()).map_err(|e| Failure::Data(e.to_string()))?,
        };
        let r = self.scorer()?.score(&text)?;
        if self.json {
            print_json(&r);
        } else {
            let s = r.score;
            println!("length       {:.3}  ({} words)", s.length, r.word_count);
            println!("specificity  {:.3}  (entities {}, temporal {}, spatial {})", s.specificity, r.flags.entities, r.flags.temporal, r.flags.spatial);
            println!("disclosure   {:.3}  ({} first-person pronouns)", s.disclosure, r.pronoun_count);
            println!("emotion      {:.3}", s.emotion);
            println!("composite    {:.3}", s.composite);
        }
        Ok(())
    }

    fn design(&self, name: &str) -> Result<ExperimentDesign, Failure> {
        let mut d = match name {
            "standard" | "paper" => ExperimentDesign::default(),
            "quick" => ExperimentDesign { reps: 1, ..ExperimentDesign::default() },
            path => {
                let text = std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{path}: {e}")))?;
                serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{path}: {e}")))?
            }
        };
        if let Some(s) = self.settings.seed {
            d.seed = s;
        }
        if let Some(h) = self.settings.horizon {
            d.horizon = h;
        }
        if let Some(a) = self.settings.alpha {
            d.alpha = a;
        }
        Ok(d)
    }

    fn simulate(
        &self,
        design: &str,
        users: UsersKind,
        reps: Option<u32>,
        workers: Option<usize>,
        prior: Option<PathBuf>,
        out: Option<PathBuf>,
    ) -> Outcome {
        let mut design = self.design(design)?;
        if let Some(r) = reps {
            design.reps = r;
        }
        if let Some(w) = workers {
            design.workers = w;
        }
        let engine = self.engine(self.prior(prior.as_deref())?)?;
        let result = match users {
            UsersKind::Scripted => sim::run_experiment(&engine, &design, &PersonaUsers)?,
            UsersKind::Llm => {
                let model = self.chat_model()?;
                let factory = move |p: &Profile, _seed: u64| -> Box<dyn SimulatedUser> {
                    Box::new(LlmUser::new(model.clone(), p))
                };
                let result = sim::run_experiment(&engine, &design, &factory)?;
                if result.conversations.iter().all(|c| !c.is_complete()) {
                    let why = result.conversations.iter().find_map(|c| c.error.clone()).unwrap_or_default();
                    return Err(Failure::External(format!("no conversation completed: {why}")));
                }
                result
            }
        };
        if let Some(dir) = &out {
            result.write_to(dir)?;
        }
        if self.json {
            print_json(&result.report);
        } else {
            print!("{}", result.report.render_text());
            if let Some(dir) = &out {
                println!("\nwrote {}", dir.display());
            }
        }
        Ok(())
    }

    fn chat(&self, topic: Option<String>, baseline: bool, show_policy: bool) -> Outcome {
        let engine = self.engine(self.prior(None)?)?;
        let mut config = self.session_config();
        config.topic = topic;
        if baseline {
            config.policy = PolicyKind::historical_baseline();
        }
        let mut session = engine.start_session("terminal", config)?;
        let stdin = std::io::stdin();
        let mut lines = stdin.lock().lines();
        let mut out = std::io::stdout();
        while session.status() == SessionStatus::Active {
            let question = session.current_question().unwrap_or_default().to_string();
            let _ = writeln!(out, "[{}/{}] {question}", session.t() + 1, session.config().horizon);
            let _ = write!(out, "> ");
            let _ = out.flush();
            let Some(line) = lines.next() else { break };
            let line = line.map_err(|e| Failure::Data(e.to_string()))?;
            let answer = line.trim();
            if answer == QUIT_COMMAND {
                break;
            }
            if answer.is_empty() {
                continue;
            }
            let step = engine.step(&mut session, answer)?;
            if show_policy {
                let r = &step.record;
                let _ = writeln!(
                    out,
                    "    q={:.3} state={} action={} eps={} explored={}",
                    r.score.composite,
                    r.state,
                    r.next_action.map_or("-".to_string(), |a| a.to_string()),
                    r.epsilon.map_or("-".to_string(), |e| format!("{e:.3}")),
                    r.explored.map_or("-".to_string(), |e| e.to_string()),
                );
            }
        }
        let transcript = engine.end_session(&mut session);
        if let Some(dir) = &self.settings.transcript_dir {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
            transcript.write_jsonl(&dir.join("terminal.jsonl"))?;
        }
        if self.json {
            print_json(&transcript);
        } else {
            let q = transcript.qualities();
            let _ = writeln!(out, "\nThank you! Session {} after {} exchanges.", transcript.status, q.len());
            if let (Some(first), Some(last)) = (q.first(), q.last()) {
                let _ = writeln!(out, "quality {first:.3} -> {last:.3}");
            }
        }
        Ok(())
    }

    fn serve(&self) -> Outcome {
        let s = &self.settings;
        let engine = match self.prior(None) {
            Ok(prior) => Some(self.engine(prior)?),
            Err(f) => {
                tracing::warn!(error = f.message(), "no prior table; session creation will answer 503");
                eprintln!("warning: {}; sessions cannot be created", f.message());
                None
            }
        };
        let config = survey_service::ServiceConfig {
            admin_token: s.admin_token.clone(),
            cors_origin: s.cors_origin.clone(),
            transcript_dir: s.transcript_dir.clone(),
            defaults: self.session_config(),
        };
        let bind = s.bind.clone().unwrap_or_else(|| "127.0.0.1:8080".into());
        let addr = bind.parse().map_err(|_| Failure::Usage(format!("bad bind address {bind:?}")))?;
        let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::External(e.to_string()))?;
        eprintln!("serving on http://{bind}");
        runtime
            .block_on(survey_service::serve(addr, survey_service::AppState::new(engine, config)))
            .map_err(|e| Failure::External(format!("{bind}: {e}")))
    }

    fn stats(&self, input: &Path) -> Outcome {
        let raw = corpus::read_log(input)?;
        let cleaned = corpus::clean(&raw);
        let st = corpus::stats(&cleaned);
        if self.json {
            print_json(&st);
        } else {
            println!("{} records read, {} removed by cleaning", raw.len(), raw.len() - cleaned.len());
            print!("{}", st.render());
        }
        Ok(())
    }
}
