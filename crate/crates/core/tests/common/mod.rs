//! Synthetic corpus with sidecar artifacts. The P-analog carries a full
//! signature (longer sentences, twice the positive-emotion odds, no slang
//! noise, shifted embeddings) and the F-analog half of it.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use authentiscope::clustering::embeddings::format_embedding_tsv;
use authentiscope::corpus::Variant;
use authentiscope::morphosyntax::{write_conllu, AnnotatedSentence, AnnotatedToken, Upos};
use authentiscope::semantics::LabelVocabulary;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const PRON: &[&str] = &["I", "we", "you", "they"];
const VERB: &[&str] = &["watched", "visited", "found", "bought", "tried", "painted", "booked", "cooked"];
const DET: &[&str] = &["the", "a", "this", "our"];
const ADJ: &[&str] = &["old", "new", "quiet", "small", "red", "early", "cheap", "local", "modern", "familiar"];
const ADJ_POSITIVE: &[&str] = &["wonderful", "amazing", "lovely", "beautiful"];
const NOUN: &[&str] = &[
    "train", "garden", "market", "kitchen", "bridge", "museum", "concert", "bicycle", "river", "festival", "library",
    "station",
];
const ADP: &[&str] = &["in", "near", "after", "before", "behind"];
const ADV: &[&str] = &["quickly", "finally", "yesterday", "often", "slowly"];
const CCONJ: &[&str] = &["and", "but"];
const AUX: &[&str] = &["was", "is"];
const CITY: &[&str] = &["Berlin", "Lisbon", "Oslo", "Vienna"];
const PERSON: &[&str] = &["Anna", "Marco", "Lena", "Omar"];
/// Absent from the vector table.
pub const SLANG: &[&str] = &["lol", "omg", "smh", "tbh", "ngl", "imo", "lmao", "fr"];

pub const EMBEDDING_DIM: usize = 16;
pub const VECTOR_DIM: usize = 8;
const TOPICS: usize = 5;

pub fn strength(v: Variant) -> f64 {
    match v {
        Variant::Original => 0.0,
        Variant::FineTuned => 0.5,
        Variant::Prompted => 1.0,
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("non-empty")
}

struct Builder {
    tokens: Vec<AnnotatedToken>,
}

impl Builder {
    /// Appends a token and returns its 1-based index.
    fn push(&mut self, form: &str, upos: Upos, deprel: &str, head: usize, ner: Option<&str>) -> usize {
        self.tokens.push(AnnotatedToken {
            form: form.to_string(),
            upos,
            deprel: deprel.to_string(),
            head,
            ner: ner.map(str::to_string),
        });
        self.tokens.len()
    }

    /// Placeholder head that is fixed once the head token exists.
    fn set_head(&mut self, token: usize, head: usize) {
        self.tokens[token - 1].head = head;
    }
}

/// One sentence with at least `target` content words, `slang` leading
/// interjections and the given terminator.
fn sentence(rng: &mut ChaCha8Rng, target: usize, slang: usize, positive: bool, end: &str) -> Vec<AnnotatedToken> {
    let mut b = Builder { tokens: Vec::new() };
    let mut interjections = Vec::new();
    for _ in 0..slang {
        interjections.push(b.push(pick(rng, SLANG), Upos::Intj, "discourse", 0, None));
    }
    let subj = b.push(pick(rng, PRON), Upos::Pron, "nsubj", 0, None);
    let verb = b.push(pick(rng, VERB), Upos::Verb, "root", 0, None);
    b.set_head(subj, verb);
    for i in interjections {
        b.set_head(i, verb);
    }
    let det = b.push(pick(rng, DET), Upos::Det, "det", 0, None);
    let adj_word = if positive { pick(rng, ADJ_POSITIVE) } else { pick(rng, ADJ) };
    let adj = b.push(adj_word, Upos::Adj, "amod", 0, None);
    let obj = b.push(pick(rng, NOUN), Upos::Noun, "obj", verb, None);
    b.set_head(det, obj);
    b.set_head(adj, obj);
    let mut words = 5;
    while words < target {
        match rng.gen_range(0..4) {
            0 => {
                let case = b.push(pick(rng, ADP), Upos::Adp, "case", 0, None);
                let d = b.push(pick(rng, DET), Upos::Det, "det", 0, None);
                let a = b.push(pick(rng, ADJ), Upos::Adj, "amod", 0, None);
                let n = b.push(pick(rng, NOUN), Upos::Noun, "obl", verb, None);
                for t in [case, d, a] {
                    b.set_head(t, n);
                }
                words += 4;
            }
            1 => {
                b.push(pick(rng, ADV), Upos::Adv, "advmod", verb, None);
                words += 1;
            }
            2 => {
                let cc = b.push(pick(rng, CCONJ), Upos::Cconj, "cc", 0, None);
                let s = b.push(pick(rng, PRON), Upos::Pron, "nsubj", 0, None);
                let cop = b.push(pick(rng, AUX), Upos::Aux, "cop", 0, None);
                let a = b.push(pick(rng, ADJ), Upos::Adj, "conj", verb, None);
                for t in [cc, s, cop] {
                    b.set_head(t, a);
                }
                words += 4;
            }
            _ => {
                let case = b.push(pick(rng, ADP), Upos::Adp, "case", 0, None);
                let (name, label) = if rng.gen_bool(0.5) {
                    (pick(rng, CITY), "GPE")
                } else {
                    (pick(rng, PERSON), "PERSON")
                };
                let n = b.push(name, Upos::Propn, "obl", verb, Some(label));
                b.set_head(case, n);
                words += 2;
            }
        }
    }
    b.push(end, Upos::Punct, "punct", verb, None);
    b.tokens
}

/// Surface text: capitalized sentences, punctuation attached.
fn render(sentences: &[Vec<AnnotatedToken>]) -> String {
    let mut out = String::new();
    for s in sentences {
        if !out.is_empty() {
            out.push(' ');
        }
        let mut first = true;
        for t in s {
            if t.upos == Upos::Punct {
                out.push_str(&t.form);
                continue;
            }
            if !first {
                out.push(' ');
            }
            if first {
                let mut c = t.form.chars();
                let head = c.next().expect("non-empty form");
                out.extend(head.to_uppercase());
                out.push_str(c.as_str());
            } else {
                out.push_str(&t.form);
            }
            first = false;
        }
    }
    out
}

pub struct GeneratedText {
    pub text: String,
    pub sentences: Vec<Vec<AnnotatedToken>>,
    pub positive: bool,
}

fn generate_text(rng: &mut ChaCha8Rng, v: Variant) -> GeneratedText {
    let s = strength(v);
    let mean_len = 8.0 * (1.0 + 0.4 * s);
    let positive = rng.gen_bool(0.3 * (1.0 + s));
    let slang_total = match v {
        Variant::Original => *[1usize, 2, 2, 3].choose(rng).expect("non-empty"),
        Variant::FineTuned => *[0usize, 1, 1, 2].choose(rng).expect("non-empty"),
        Variant::Prompted => 0,
    };
    let n_sent = 2;
    let mut sentences = Vec::new();
    for k in 0..n_sent {
        let target = (mean_len + 1.5 * gauss(rng)).round().max(5.0) as usize;
        let slang = if k == 0 { slang_total.min(2) } else { slang_total.saturating_sub(2) };
        let end = if k == n_sent - 1 && positive {
            "!"
        } else if rng.gen_bool(0.3 - 0.2 * s) {
            "?"
        } else {
            "."
        };
        sentences.push(sentence(rng, target, slang, positive && k == 0, end));
    }
    GeneratedText {
        text: render(&sentences),
        sentences,
        positive,
    }
}

pub struct Fixture {
    pub dir: PathBuf,
    pub dataset: PathBuf,
    pub manifest: PathBuf,
    pub vectors: PathBuf,
    pub n_samples: usize,
}

fn labels_json(vocab: &LabelVocabulary, topic: usize, positive: bool, rng: &mut ChaCha8Rng) -> serde_json::Value {
    let rest = 0.4 / (vocab.topics.len() - 1) as f64;
    let topics: serde_json::Map<String, serde_json::Value> = vocab
        .topics
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), json!(if i == topic { 0.6 } else { rest })))
        .collect();
    let main = if positive {
        *["joy", "optimism"].choose(rng).expect("non-empty")
    } else {
        *["anger", "sadness"].choose(rng).expect("non-empty")
    };
    let emotions: serde_json::Map<String, serde_json::Value> = vocab
        .emotions
        .iter()
        .map(|e| (e.clone(), json!(if e == main { 0.7 } else { 0.1 })))
        .collect();
    let sentiment = if positive {
        json!({"negative": 0.1, "neutral": 0.2, "positive": 0.7})
    } else {
        json!({"negative": 0.6, "neutral": 0.3, "positive": 0.1})
    };
    json!({"topic": topics, "emotion": emotions, "sentiment": sentiment})
}

/// Writes dataset, manifest, CoNLL-U, label and embedding files plus a
/// static vector table under `dir`.
pub fn generate(dir: &Path, n_samples: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = LabelVocabulary::default();
    let side = dir.join("sidecars");
    fs::create_dir_all(&side).unwrap();

    let centers: Vec<Vec<f64>> = (0..TOPICS)
        .map(|_| (0..EMBEDDING_DIM).map(|_| 3.0 * gauss(&mut rng)).collect())
        .collect();
    let mut style: Vec<f64> = (0..EMBEDDING_DIM).map(|_| gauss(&mut rng)).collect();
    let norm = style.iter().map(|x| x * x).sum::<f64>().sqrt();
    style.iter_mut().for_each(|x| *x *= 3.0 / norm);

    let mut jsonl = String::new();
    let mut manifest = serde_json::Map::new();
    for i in 0..n_samples {
        let id = format!("s{i:04}");
        let topic = rng.gen_range(0..TOPICS);
        let mut replies = Vec::new();
        for v in Variant::ALL {
            let g = generate_text(&mut rng, v);
            let stem = format!("{id}_{}", v.code());
            let sentences: Vec<AnnotatedSentence> = g
                .sentences
                .iter()
                .enumerate()
                .map(|(k, toks)| AnnotatedSentence {
                    sent_id: Some(format!("{stem}_{k}")),
                    tokens: toks.clone(),
                })
                .collect();
            fs::write(side.join(format!("{stem}.conllu")), write_conllu(&sentences)).unwrap();
            let labels = labels_json(&vocab, topic, g.positive, &mut rng);
            fs::write(side.join(format!("{stem}.json")), labels.to_string()).unwrap();
            let emb: Vec<f64> = (0..EMBEDDING_DIM)
                .map(|d| centers[topic][d] + strength(v) * style[d] + 0.5 * gauss(&mut rng))
                .collect();
            fs::write(side.join(format!("{stem}.tsv")), format_embedding_tsv(&emb)).unwrap();
            manifest.insert(
                format!("{id}/{}", v.code()),
                json!({
                    "conllu": format!("sidecars/{stem}.conllu"),
                    "labels": format!("sidecars/{stem}.json"),
                    "embedding": format!("sidecars/{stem}.tsv"),
                }),
            );
            replies.push(g.text);
        }
        let record = json!({
            "id": id,
            "lang": "en",
            "prompt": [{"role": "user", "content": format!("Reply to the post about topic {topic}.")}],
            "authentic_reply": replies[0],
            "base_model_reply": replies[1],
            "ft_model_reply": replies[2],
        });
        writeln!(jsonl, "{record}").unwrap();
    }
    let dataset = dir.join("en.jsonl");
    fs::write(&dataset, jsonl).unwrap();
    let manifest_path = dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::Value::Object(manifest).to_string()).unwrap();

    let mut table = String::new();
    let words = [PRON, VERB, DET, ADJ, ADJ_POSITIVE, NOUN, ADP, ADV, CCONJ, AUX, CITY, PERSON].concat();
    for w in words {
        let v: Vec<String> = (0..VECTOR_DIM).map(|_| format!("{:.6}", rng.gen_range(-1.0..1.0))).collect();
        writeln!(table, "{} {}", w.to_lowercase(), v.join(" ")).unwrap();
    }
    let vectors = dir.join("vectors.txt");
    fs::write(&vectors, table).unwrap();

    Fixture {
        dir: dir.to_path_buf(),
        dataset,
        manifest: manifest_path,
        vectors,
        n_samples,
    }
}

/// Config for the fixture with a small, fast detector.
pub fn write_config(f: &Fixture, extra: serde_json::Value) -> PathBuf {
    let mut c = json!({
        "dataset": "en.jsonl",
        "lang": "en",
        "manifest": "manifest.json",
        "vectors": "vectors.txt",
        "seed": 42,
        "detector": {"n_rounds": 30, "max_depth": 3, "learning_rate": 0.3},
    });
    if let (Some(base), Some(more)) = (c.as_object_mut(), extra.as_object()) {
        for (k, v) in more {
            base.insert(k.clone(), v.clone());
        }
    }
    let path = f.dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&c).unwrap()).unwrap();
    path
}
