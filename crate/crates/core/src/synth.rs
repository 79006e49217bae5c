//! Synthetic crisis messages and stand-in pre-trained vectors, for tests and
//! demos where real crisis data is unavailable.
//!
//! Both classes draw their words from one topical vocabulary. Urgent
//! messages additionally carry urgency keywords (probability
//! `keyword_prob`) and a number (probability `digit_prob`). A few messages
//! get mentions, hashtags and links so preprocessing has work to do.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingModel;
use crate::preprocess::{Label, Message};
use crate::seed::{derive_seed, STREAM_SYNTH};

/// Which crisis the topical vocabulary describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    Flood,
    Earthquake,
}

const SHARED: &[&str] = &[
    "the", "a", "in", "of", "to", "and", "is", "are", "we", "our", "people", "area", "city", "town",
    "village", "road", "near", "today", "now", "still", "after", "last", "night", "morning", "news",
    "update", "report", "local", "government", "team", "volunteers", "relief", "camp", "shelter",
    "family", "families", "school", "hospital", "power", "water", "food", "hit", "district", "army",
    "police", "church", "market", "photos", "video", "please", "share", "pray", "thoughts", "everyone",
    "situation", "officials", "said", "says", "reports", "north", "south", "east", "west", "bridge",
];

const FLOOD: &[&str] = &[
    "flood", "floods", "flooding", "rain", "rains", "river", "rising", "levels", "dam", "banks",
    "submerged", "boats", "boat", "monsoon", "landslide", "landslides", "downpour", "inundated",
    "waterlogged", "overflow", "evacuation", "evacuated", "kerala", "kochi", "roof", "rooftop",
    "streams", "heavy", "alert", "red", "gates", "opened", "shutters", "current", "mud",
];

const EARTHQUAKE: &[&str] = &[
    "earthquake", "quake", "tremor", "tremors", "aftershock", "aftershocks", "magnitude", "rubble",
    "collapsed", "buildings", "building", "debris", "temple", "kathmandu", "nepal", "valley",
    "cracks", "damaged", "destroyed", "epicenter", "shaking", "shook", "ground", "houses", "walls",
    "heritage", "tents", "open", "square", "richter", "seismic", "rescuers", "dig", "dust", "survey",
];

/// Words that fire the default keyword stems.
const URGENCY: &[&str] = &[
    "help", "helping", "need", "needed", "needs", "urgent", "urgently", "injured", "injuries",
    "stranded", "missing", "killed", "kill", "die", "dies", "food", "hit",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub unlabeled: usize,
    pub labeled: usize,
    pub urgent_fraction: f64,
    pub keyword_prob: f64,
    pub digit_prob: f64,
    pub min_words: usize,
    pub max_words: usize,
    /// Chance a message carries a mention, hashtag or link.
    pub noise_prob: f64,
    pub topic: Topic,
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            unlabeled: 5000,
            labeled: 400,
            urgent_fraction: 0.5,
            keyword_prob: 0.6,
            digit_prob: 0.4,
            min_words: 6,
            max_words: 16,
            noise_prob: 0.2,
            topic: Topic::Flood,
            id_prefix: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    /// Background messages, labels removed.
    pub unlabeled: Vec<Message>,
    pub labeled: Vec<Message>,
}

fn topical(topic: Topic) -> Vec<&'static str> {
    let own = match topic {
        Topic::Flood => FLOOD,
        Topic::Earthquake => EARTHQUAKE,
    };
    SHARED.iter().chain(own).copied().collect()
}

fn message(rng: &mut ChaCha8Rng, cfg: &SynthConfig, vocab: &[&str], urgent: bool) -> String {
    let len = rng.random_range(cfg.min_words..=cfg.max_words.max(cfg.min_words));
    let mut words: Vec<String> = (0..len)
        .map(|_| vocab.choose(rng).expect("vocabulary non-empty").to_string())
        .collect();
    let mut insert = |rng: &mut ChaCha8Rng, w: String| {
        let at = rng.random_range(0..=words.len());
        words.insert(at, w);
    };
    if urgent {
        if rng.random_bool(cfg.keyword_prob) {
            for _ in 0..rng.random_range(1..=2) {
                let w = URGENCY.choose(rng).expect("non-empty").to_string();
                insert(rng, w);
            }
        }
        if rng.random_bool(cfg.digit_prob) {
            let n = rng.random_range(1..=500u32).to_string();
            insert(rng, n);
        }
    }
    if rng.random_bool(cfg.noise_prob) {
        let w = match rng.random_range(0..3) {
            0 => format!("@user{}", rng.random_range(1..1000)),
            1 => format!("#{}", vocab.choose(rng).expect("non-empty")),
            _ => format!("http://t.co/{:x}", rng.random::<u32>()),
        };
        insert(rng, w);
    }
    if rng.random_bool(0.1) {
        words.insert(0, "RT".to_string());
    }
    if rng.random_bool(0.3) {
        if let Some(first) = words.first_mut() {
            let mut c = first.chars();
            if let Some(h) = c.next() {
                *first = h.to_uppercase().chain(c).collect();
            }
        }
    }
    words.join(" ")
}

/// Generates `cfg.unlabeled` background and `cfg.labeled` labeled messages.
/// Exactly `round(urgent_fraction * n)` of each part are urgent, in shuffled
/// positions.
pub fn synth_corpus(cfg: &SynthConfig, seed: u64) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SYNTH));
    let vocab = topical(cfg.topic);
    let part = |n: usize, tag: &str, rng: &mut ChaCha8Rng| -> Vec<Message> {
        let urgent_n = (cfg.urgent_fraction * n as f64).round() as usize;
        let mut flags: Vec<bool> = (0..n).map(|i| i < urgent_n).collect();
        rand::seq::SliceRandom::shuffle(flags.as_mut_slice(), rng);
        flags
            .into_iter()
            .enumerate()
            .map(|(i, urgent)| {
                let text = message(rng, cfg, &vocab, urgent);
                Message::labeled(format!("{}{tag}{i:05}", cfg.id_prefix), text, Label::from_bool(urgent))
            })
            .collect()
    };
    let unlabeled = part(cfg.unlabeled, "u", &mut rng)
        .into_iter()
        .map(|m| Message { label: None, ..m })
        .collect();
    let labeled = part(cfg.labeled, "l", &mut rng);
    SynthCorpus { unlabeled, labeled }
}

/// Stand-in for general-domain pre-trained vectors over the vocabulary of
/// both topics and the urgency words. Vectors are standard normal; urgency
/// words share an extra common direction, mimicking the relatedness a
/// general-domain model would assign them.
pub fn synth_pretrained(dim: usize, seed: u64) -> EmbeddingModel {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SYNTH ^ 0xA5A5));
    let mut words: Vec<&str> = SHARED
        .iter()
        .chain(FLOOD)
        .chain(EARTHQUAKE)
        .chain(URGENCY)
        .copied()
        .collect();
    words.sort_unstable();
    words.dedup();
    let shared: Vec<f32> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut vectors = Vec::with_capacity(words.len() * dim);
    for w in &words {
        let boost = if URGENCY.contains(w) { 1.0 } else { 0.0 };
        for s in &shared {
            let noise: f32 = StandardNormal.sample(&mut rng);
            vectors.push(noise + boost * s);
        }
    }
    let n = words.len();
    EmbeddingModel::from_parts(
        dim,
        words.into_iter().map(str::to_string).collect(),
        vec![0; n],
        vectors,
        None,
        None,
    )
}
