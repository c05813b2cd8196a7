use std::fs::{self, File};
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mnemocue::cuegen::live::{LiveImageProvider, LiveTextProvider};
use mnemocue::cuegen::mock::{MockImageProvider, MockTextProvider};
use mnemocue::cuegen::{
    apply_curation, generate_deck, parse_curated, parse_words, ImageProvider, ProviderConfig, ProviderKind, TextProvider,
};
use mnemocue::keywordgen::{candidate_pool, rank_keywords, FeatureTable, KeywordResources, KeywordTarget, ScoreWeights};
use mnemocue::lexicon::{load_deck, load_word_vectors, ImageabilityTable, PronunciationDict};
use mnemocue::scoring::{read_responses, score_responses, write_rows};
use mnemocue::service::{self, load_sessions, session_responses, SessionStore, SystemClock};
use mnemocue::stats::{self, aggregate_participant, filter_excluded, per_word_table, score_session, SampleUnit};
use mnemocue::data_dir;

#[derive(Parser)]
#[command(name = "mnemocue", version, about = "Keyword mnemonic cue generation and study toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Provider {
    Mock,
    Live,
}

#[derive(Subcommand)]
enum Command {
    /// Rank keyword candidates for an L2 word.
    Keywords {
        word: String,
        /// Deck to take the meaning from.
        #[arg(long)]
        deck: Option<PathBuf>,
        /// Meaning, when the word is not in a deck.
        #[arg(long)]
        meaning: Option<String>,
        #[arg(short, default_value_t = 5)]
        k: usize,
        /// Weights for phonetic, orthographic, imageability, semantic.
        #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
        weights: String,
        #[arg(long, default_value_os_t = data_dir())]
        data: PathBuf,
    },
    /// Generate verbal and visual cues for a word list.
    GenerateDeck {
        #[arg(long)]
        words: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Provider::Mock)]
        provider: Provider,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        temperature: f64,
        #[arg(long, default_value_t = 3)]
        retries: u32,
        #[arg(long, default_value = "text-davinci-003")]
        model: String,
        /// Deck name; defaults to the output file stem.
        #[arg(long)]
        name: Option<String>,
        /// Hand-written manual keywords and cues to merge in.
        #[arg(long)]
        curated: Option<PathBuf>,
    },
    /// Score a response CSV.
    Score {
        #[arg(long)]
        deck: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long, default_value_os_t = data_dir().join("vectors.txt"))]
        vectors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate session logs and run the condition comparisons.
    Analyze {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        deck: PathBuf,
        #[arg(long, default_value_os_t = data_dir().join("vectors.txt"))]
        vectors: PathBuf,
        /// File with one participant id per line.
        #[arg(long)]
        exclude: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "per-word")]
        unit: SampleUnit,
    },
    /// Run the study server.
    Serve {
        #[arg(long)]
        deck: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, default_value = "sessions")]
        sessions_dir: PathBuf,
        /// Enables scored summaries.
        #[arg(long)]
        vectors: Option<PathBuf>,
    },
    /// Write all test answers from session logs as a response CSV.
    Export {
        #[arg(long)]
        deck: PathBuf,
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Keywords {
            word,
            deck,
            meaning,
            k,
            weights,
            data,
        } => keywords(&word, deck.as_deref(), meaning, k, &weights, &data),
        Command::GenerateDeck {
            words,
            out,
            provider,
            seed,
            temperature,
            retries,
            model,
            name,
            curated,
        } => {
            let config = ProviderConfig {
                kind: match provider {
                    Provider::Mock => ProviderKind::Mock,
                    Provider::Live => ProviderKind::Live,
                },
                model,
                temperature,
                retry_limit: retries,
                seed,
            };
            generate(&words, &out, &config, name, curated.as_deref())
        }
        Command::Score {
            deck,
            responses,
            vectors,
            out,
        } => {
            let deck = load_deck(&deck)?;
            let store = load_word_vectors(&vectors)?;
            let rows = read_responses(File::open(&responses).with_context(|| responses.display().to_string())?)?;
            let scored = score_responses(&deck, &store, &rows)?;
            write_rows(BufWriter::new(File::create(&out)?), &scored)?;
            log::info!("scored {} responses into {}", scored.len(), out.display());
            Ok(())
        }
        Command::Analyze {
            sessions,
            deck,
            vectors,
            exclude,
            out,
            unit,
        } => analyze(&sessions, &deck, &vectors, exclude.as_deref(), &out, unit),
        Command::Serve {
            deck,
            port,
            host,
            sessions_dir,
            vectors,
        } => {
            let media_dir = deck.parent().map(|p| p.join("media"));
            let deck = Arc::new(load_deck(&deck)?);
            let (mut store, failures) = SessionStore::open(deck, sessions_dir, Arc::new(SystemClock))?;
            for (path, e) in &failures {
                log::error!("skipped {}: {e}", path.display());
            }
            if let Some(v) = vectors {
                store = store.with_vectors(Arc::new(load_word_vectors(v)?));
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(Arc::new(store), media_dir, SocketAddr::new(host, port)))?;
            Ok(())
        }
        Command::Export { deck, sessions, out } => {
            let deck = load_deck(&deck)?;
            let (sessions, failed) = load_sessions(&deck, &sessions)?;
            for (path, e) in &failed {
                log::error!("skipped {}: {e}", path.display());
            }
            let rows: Vec<_> = sessions.iter().flat_map(session_responses).collect();
            write_rows(BufWriter::new(File::create(&out)?), &rows)?;
            log::info!("exported {} responses from {} sessions", rows.len(), sessions.len());
            Ok(())
        }
    }
}

fn keywords(word: &str, deck: Option<&Path>, meaning: Option<String>, k: usize, weights: &str, data: &Path) -> Result<()> {
    let meaning = match (meaning, deck) {
        (Some(m), _) => m,
        (None, Some(path)) => {
            let deck = load_deck(path)?;
            deck.entry(word)
                .with_context(|| format!("{word:?} is not in {}", path.display()))?
                .l1_meaning
                .clone()
        }
        (None, None) => bail!("pass --deck or --meaning"),
    };
    let weights = ScoreWeights::parse(weights)?;
    let features = FeatureTable::load(data.join("features.tsv"))?;
    let dict = PronunciationDict::load(data.join("pronunciations.tsv"))?;
    let imageability = ImageabilityTable::load(data.join("imageability.tsv"))?;
    let embeddings = load_word_vectors(data.join("vectors.txt"))?;
    let pronunciation = dict
        .get(word)
        .with_context(|| format!("no pronunciation for {word:?}"))?
        .clone();
    let target = KeywordTarget {
        spelling: word.to_string(),
        pronunciation,
        meaning,
    };
    let resources = KeywordResources {
        embeddings: &embeddings,
        imageability: &imageability,
        features: &features,
    };
    let ranking = rank_keywords(&target, &candidate_pool(&imageability, &dict), &weights, &resources, k)?;
    println!("{}", serde_json::to_string_pretty(&ranking)?);
    Ok(())
}

fn generate(words: &Path, out: &Path, config: &ProviderConfig, name: Option<String>, curated: Option<&Path>) -> Result<()> {
    let specs = parse_words(&fs::read_to_string(words).with_context(|| words.display().to_string())?)?;
    let root = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = name.unwrap_or_else(|| out.file_stem().unwrap_or_default().to_string_lossy().into_owned());
    let (text, image): (Box<dyn TextProvider>, Box<dyn ImageProvider>) = match config.kind {
        ProviderKind::Mock => (Box::new(MockTextProvider::new()), Box::new(MockImageProvider)),
        ProviderKind::Live => (Box::new(LiveTextProvider::from_env()?), Box::new(LiveImageProvider::from_env()?)),
    };
    let mut generation = generate_deck(&name, &specs, text.as_ref(), image.as_ref(), config, root)?;
    if let Some(path) = curated {
        let cues = parse_curated(&fs::read_to_string(path).with_context(|| path.display().to_string())?)?;
        apply_curation(&mut generation.entries, &cues, image.as_ref(), config, root)?;
    }
    if !generation.failures.is_empty() {
        let report = out.with_extension("failures.json");
        fs::write(&report, serde_json::to_string_pretty(&generation.failures)?)?;
        log::warn!("{} words failed, see {}", generation.failures.len(), report.display());
    }
    let deck = generation
        .into_deck()
        .context("generated entries do not form a balanced deck")?;
    deck.save(out)?;
    log::info!("wrote {} entries to {}", deck.len(), out.display());
    Ok(())
}

fn analyze(
    sessions_dir: &Path,
    deck: &Path,
    vectors: &Path,
    exclude: Option<&Path>,
    out: &Path,
    unit: SampleUnit,
) -> Result<()> {
    let deck = load_deck(deck)?;
    let store = load_word_vectors(vectors)?;
    let (sessions, failed) = load_sessions(&deck, sessions_dir)?;
    for (path, e) in &failed {
        log::error!("skipped {}: {e}", path.display());
    }
    let ids: Vec<String> = match exclude {
        Some(p) => fs::read_to_string(p)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect(),
        None => Vec::new(),
    };
    let (sessions, report) = filter_excluded(sessions, &ids);
    log::info!("{} sessions after exclusion ({} removed)", report.remaining, report.removed);

    let mut participants = Vec::new();
    let mut scores = Vec::new();
    for s in &sessions {
        if !s.is_done() {
            log::warn!("session {} is incomplete, missing {:?}", s.session_id, s.missing_phases());
            continue;
        }
        let sc = score_session(s, &deck, &store)?;
        participants.push(aggregate_participant(s, &sc)?);
        scores.push(sc);
    }
    let words = per_word_table(&deck, &scores);
    let samples = stats::condition_samples(unit, &participants, &words);
    let tests = stats::run_hypotheses(&samples);

    fs::create_dir_all(out)?;
    let create = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(out.join(name))?)) };
    stats::write_participants_csv(create("participants.csv")?, &participants)?;
    stats::write_per_word_csv(create("per_word.csv")?, &words)?;
    stats::write_tests_csv(create("tests.csv")?, &tests)?;
    stats::write_long_csv(create("long.csv")?, &participants)?;
    for t in &tests {
        println!(
            "{} vs {} ({}): t({:.1}) = {:.2}, p = {:.3}{}",
            t.condition_a,
            t.condition_b,
            t.tail,
            t.df,
            t.t,
            t.p,
            if t.significant { " *" } else { "" }
        );
    }
    Ok(())
}
