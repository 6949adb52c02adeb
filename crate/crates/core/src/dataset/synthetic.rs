use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PairedRecord, Variant, FEMALE, MALE};
use crate::error::{Error, Result};
use crate::textmodel::split_tokens;

/// Gendered word pairs, male form first.
pub const GENDER_PAIRS: [(&str, &str); 20] = [
    ("he", "she"),
    ("him", "her"),
    ("his", "her"),
    ("himself", "herself"),
    ("mr", "mrs"),
    ("man", "woman"),
    ("boy", "girl"),
    ("brother", "sister"),
    ("father", "mother"),
    ("son", "daughter"),
    ("husband", "wife"),
    ("uncle", "aunt"),
    ("nephew", "niece"),
    ("king", "queen"),
    ("actor", "actress"),
    ("waiter", "waitress"),
    ("gentleman", "lady"),
    ("grandfather", "grandmother"),
    ("boyfriend", "girlfriend"),
    ("groom", "bride"),
];

const SUBJ: (&str, &str) = ("he", "she");
const OBJ: (&str, &str) = ("him", "her");
const POSS: (&str, &str) = ("his", "her");
const REFL: (&str, &str) = ("himself", "herself");

const ADJ: [&str; 12] = [
    "calm", "tired", "curious", "honest", "quiet", "cheerful", "nervous", "patient", "careful",
    "proud", "busy", "lucky",
];
const PLACE: [&str; 10] = [
    "market", "station", "library", "office", "garden", "kitchen", "museum", "harbor", "school",
    "bakery",
];
const THING: [&str; 10] = [
    "letter", "book", "ticket", "basket", "lamp", "bicycle", "photo", "map", "coat", "umbrella",
];
const TIME: [&str; 6] = ["yesterday", "today", "tonight", "early", "later", "again"];
const VERB: [&str; 10] = [
    "found", "carried", "painted", "borrowed", "opened", "cleaned", "sold", "lost", "fixed",
    "wrapped",
];
const FILLERS: [&str; 6] = ["really", "quite", "truly", "very", "indeed", "still"];

const NEUTRAL_SLOTS: [(&str, &[&str]); 5] = [
    ("adj", &ADJ),
    ("place", &PLACE),
    ("thing", &THING),
    ("time", &TIME),
    ("verb", &VERB),
];

/// Sentence templates. Gendered slots: `{subj}`, `{obj}`, `{poss}`,
/// `{refl}`, `{noun}`; neutral slots: `{adj}`, `{place}`, `{thing}`,
/// `{time}`, `{verb}`.
pub fn default_templates() -> Vec<String> {
    [
        "{subj} was {adj} when {subj} reached the {place} .",
        "the {noun} carried {poss} {thing} to the {place} {time} .",
        "{subj} {verb} the {thing} that {poss} {noun} left at the {place} .",
        "everyone at the {place} thanked {obj} for the {thing} .",
        "the {adj} {noun} {verb} a {thing} {time} .",
        "{subj} asked {poss} {noun} about the {thing} .",
        "{subj} felt {adj} and went to the {place} by {refl} .",
        "a {noun} {verb} {poss} {thing} near the {place} .",
        "{poss} {thing} was {adj} , so {subj} {verb} it {time} .",
        "we met the {noun} at the {place} {time} .",
        "the {place} was {adj} , but {subj} stayed with {poss} {noun} .",
        "nobody told {obj} that the {thing} was at the {place} .",
    ]
    .map(String::from)
    .to_vec()
}

/// Planted difference between the two subgroups of a synthetic corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Injection {
    /// Variants differ only in their gendered words.
    None,
    /// Female variants get two to four filler words appended.
    Length,
    /// Female variants have their neutral words redrawn with probability one half.
    Noise,
}

impl fmt::Display for Injection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Injection::None => "none",
            Injection::Length => "length",
            Injection::Noise => "noise",
        })
    }
}

impl FromStr for Injection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Injection::None),
            "length" => Ok(Injection::Length),
            "noise" => Ok(Injection::Noise),
            _ => Err(Error::Config(format!("unknown injection '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Gender {
    Male,
    Female,
}

impl Gender {
    fn pick(self, pair: (&'static str, &'static str)) -> &'static str {
        match self {
            Gender::Male => pair.0,
            Gender::Female => pair.1,
        }
    }

    fn subgroup(self) -> &'static str {
        match self {
            Gender::Male => MALE,
            Gender::Female => FEMALE,
        }
    }

    fn label(self) -> usize {
        match self {
            Gender::Male => 1,
            Gender::Female => 0,
        }
    }
}

/// Slot choices shared by both variants of a pair.
#[derive(Debug, Clone)]
struct Draw {
    template: usize,
    noun: usize,
    neutral: [usize; NEUTRAL_SLOTS.len()],
}

fn noun_pairs() -> &'static [(&'static str, &'static str)] {
    &GENDER_PAIRS[5..]
}

fn draw<R: Rng>(rng: &mut R, n_templates: usize) -> Draw {
    let template = rng.gen_range(0..n_templates);
    let noun = rng.gen_range(0..noun_pairs().len());
    let neutral = NEUTRAL_SLOTS.map(|(_, words)| rng.gen_range(0..words.len()));
    Draw {
        template,
        noun,
        neutral,
    }
}

fn check_templates<S: AsRef<str>>(templates: &[S]) -> Result<()> {
    if templates.is_empty() {
        return Err(Error::Config("at least one template is required".into()));
    }
    let known: HashSet<&str> = ["subj", "obj", "poss", "refl", "noun"]
        .into_iter()
        .chain(NEUTRAL_SLOTS.iter().map(|(s, _)| *s))
        .collect();
    for t in templates {
        let t = t.as_ref();
        let mut rest = t;
        while let Some(open) = rest.find('{') {
            let close = rest[open..]
                .find('}')
                .ok_or_else(|| Error::Config(format!("unclosed slot in template '{t}'")))?;
            let name = &rest[open + 1..open + close];
            if !known.contains(name) {
                return Err(Error::Config(format!(
                    "unknown slot '{{{name}}}' in template '{t}'"
                )));
            }
            rest = &rest[open + close + 1..];
        }
        if split_tokens(t).is_empty() {
            return Err(Error::Config("empty template".into()));
        }
    }
    Ok(())
}

fn render(template: &str, d: &Draw, g: Gender) -> String {
    let mut out = template
        .replace("{subj}", g.pick(SUBJ))
        .replace("{obj}", g.pick(OBJ))
        .replace("{poss}", g.pick(POSS))
        .replace("{refl}", g.pick(REFL))
        .replace("{noun}", g.pick(noun_pairs()[d.noun]));
    for ((slot, words), &k) in NEUTRAL_SLOTS.iter().zip(&d.neutral) {
        out = out.replace(&format!("{{{slot}}}"), words[k]);
    }
    out
}

fn variant(text: String, g: Gender) -> Variant {
    Variant {
        subgroup: g.subgroup().into(),
        text,
        label: g.label(),
    }
}

/// Paired corpus from `templates`: variant A is male (label 1), variant B
/// female (label 0), with the requested injection applied to variant B.
pub fn generate_synthetic_paired<S: AsRef<str>>(
    templates: &[S],
    n_pairs: usize,
    injection: Injection,
    seed: u64,
) -> Result<Vec<PairedRecord>> {
    check_templates(templates)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let d = draw(&mut rng, templates.len());
        let template = templates[d.template].as_ref();
        let male = render(template, &d, Gender::Male);
        let female = match injection {
            Injection::None => render(template, &d, Gender::Female),
            Injection::Length => {
                let k = rng.gen_range(2..=4);
                let mut text = render(template, &d, Gender::Female);
                for _ in 0..k {
                    text.push(' ');
                    text.push_str(FILLERS[rng.gen_range(0..FILLERS.len())]);
                }
                text
            }
            Injection::Noise => {
                let mut noisy = d.clone();
                for (k, (_, words)) in noisy.neutral.iter_mut().zip(NEUTRAL_SLOTS) {
                    if rng.gen_bool(0.5) {
                        *k = rng.gen_range(0..words.len());
                    }
                }
                render(template, &noisy, Gender::Female)
            }
        };
        out.push(PairedRecord {
            pair_id: (i + 1).to_string(),
            a: variant(male, Gender::Male),
            b: variant(female, Gender::Female),
        });
    }
    Ok(out)
}

/// Paired corpus with no subgroup signal: both variants share one draw, and
/// each variant's gender is an independent fair coin. Subgroups are tagged
/// `A` and `B`; labels follow the gender actually used.
pub fn generate_null_paired<S: AsRef<str>>(
    templates: &[S],
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<PairedRecord>> {
    check_templates(templates)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let d = draw(&mut rng, templates.len());
        let template = templates[d.template].as_ref();
        let mut side = |tag: &str| {
            let g = if rng.gen_bool(0.5) {
                Gender::Male
            } else {
                Gender::Female
            };
            Variant {
                subgroup: tag.into(),
                text: render(template, &d, g),
                label: g.label(),
            }
        };
        let a = side("A");
        let b = side("B");
        out.push(PairedRecord {
            pair_id: (i + 1).to_string(),
            a,
            b,
        });
    }
    Ok(out)
}

pub fn is_gender_word(token: &str) -> bool {
    GENDER_PAIRS.iter().any(|(m, f)| *m == token || *f == token)
}

/// Tokenizes `text` and replaces every gendered word with `[MASK]`.
pub fn mask_gender_words(text: &str) -> String {
    split_tokens(text)
        .into_iter()
        .map(|t| {
            if is_gender_word(&t) {
                "[MASK]".to_string()
            } else {
                t
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}
