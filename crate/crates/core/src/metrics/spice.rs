use std::collections::BTreeSet;
use std::collections::HashSet;
use std::sync::OnceLock;

use super::ScoredValue;
use crate::textproc::{stem, tokenize};

/// A semantic proposition extracted from a caption: a bare object, an
/// object with an attribute, or a subject-relation-object triple. All
/// elements are Porter stems.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SceneTuple {
    Object(String),
    Attribute { object: String, attribute: String },
    Relation {
        subject: String,
        relation: String,
        object: String,
    },
}

const FUNCTION_WORDS: &[&str] = &[
    // determiners and quantifiers
    "the", "a", "an", "this", "that", "these", "those", "his", "her", "its", "their", "our",
    "my", "your", "some", "any", "each", "every", "all", "both", "few", "many", "several",
    "most", "other", "another", "such", "one", "two", "three",
    // prepositions
    "in", "on", "at", "by", "with", "from", "to", "of", "for", "over", "under", "above",
    "below", "near", "behind", "beside", "between", "into", "onto", "through", "during",
    "against", "across", "around", "along", "off", "out", "up", "down", "within", "without",
    "toward", "towards", "upon", "about", "via",
    // pronouns
    "he", "she", "it", "they", "we", "i", "you", "him", "them", "us", "me", "who", "whom",
    "which", "what", "itself", "himself", "herself", "themselves", "something", "someone",
    // conjunctions and complementizers
    "and", "or", "but", "nor", "so", "yet", "while", "because", "although", "though", "if",
    "when", "as", "since", "than", "whether", "whereas",
    // auxiliaries and copulas
    "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "has",
    "have", "had", "will", "would", "can", "could", "may", "might", "must", "shall",
    "should",
    // frequent adverbs and particles
    "not", "no", "also", "very", "too", "there", "here", "then", "thus", "however",
    "therefore", "just", "only", "quite", "rather", "really", "currently", "likely",
];

/// Clause boundaries inside a sentence.
const CLAUSE_BREAKERS: &[&str] = &[
    "and", "or", "but", "nor", "while", "because", "although", "though", "if", "when",
    "since", "whereas", "as", "whether",
];

/// Base-form verbs, matched on Porter stems so inflected forms also hit.
const VERBS: &[&str] = &[
    "lift", "carry", "bend", "hold", "work", "stand", "kneel", "squat", "crouch", "reach",
    "lean", "climb", "pull", "push", "wear", "use", "cut", "move", "operate", "install",
    "repair", "dig", "paint", "weld", "drill", "hammer", "place", "secure", "expose",
    "require", "cause", "lead", "show", "describe", "indicate", "perform", "maintain",
    "twist", "stretch", "grip", "grab", "lower", "raise", "face", "pose", "sit", "walk",
    "run", "appear", "seem", "look", "tell", "see", "make", "take", "keep", "put", "get",
    "go", "come", "try", "help", "need", "involve", "suggest", "remain", "strain", "stoop",
    "handle", "fix", "build", "measure", "inspect", "assemble", "transport", "load",
    "unload", "shovel", "sweep", "mix", "pour", "attach", "adjust",
];

/// Common attributive adjectives plus the domain vocabulary; augmented by
/// suffix heuristics in `is_adjective`.
const ADJECTIVES: &[&str] = &[
    "tall", "short", "big", "small", "large", "heavy", "light", "high", "low", "awkward",
    "poor", "good", "bad", "safe", "unsafe", "improper", "proper", "prolonged", "static",
    "bent", "twisted", "forward", "overhead", "manual", "blue", "red", "green", "yellow",
    "orange", "white", "black", "grey", "gray", "brown", "young", "old", "long", "wide",
    "narrow", "hard", "soft", "intense", "sustained", "constant", "frequent", "wooden",
    "steel", "concrete", "neutral", "upright", "elevated", "uneven", "wet", "dry",
];

const ADJECTIVE_SUFFIXES: &[&str] = &["ful", "ous", "ive", "able", "ible", "ic", "ish", "less", "al"];

fn function_words() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| FUNCTION_WORDS.iter().copied().collect())
}

fn clause_breakers() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| CLAUSE_BREAKERS.iter().copied().collect())
}

fn verb_stems() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| VERBS.iter().map(|v| stem(v)).collect())
}

fn adjective_forms() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| {
        ADJECTIVES
            .iter()
            .flat_map(|a| [a.to_string(), stem(a)])
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WordClass {
    Function,
    Adjective,
    Verb,
    Noun,
}

fn is_adjective(token: &str) -> bool {
    if adjective_forms().contains(token) || adjective_forms().contains(&stem(token)) {
        return true;
    }
    ADJECTIVE_SUFFIXES
        .iter()
        .any(|s| token.len() >= s.len() + 3 && token.ends_with(s))
}

fn classify(token: &str) -> WordClass {
    if function_words().contains(token) {
        WordClass::Function
    } else if is_adjective(token) {
        WordClass::Adjective
    } else if verb_stems().contains(&stem(token)) {
        WordClass::Verb
    } else {
        WordClass::Noun
    }
}

/// Splits text into clauses: sentence punctuation first, then coordinating
/// and subordinating conjunctions inside the token stream.
fn clauses(text: &str) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for segment in text.split(['.', ',', ';', ':', '!', '?', '(', ')']) {
        let tokens = tokenize(segment);
        if tokens.is_empty() {
            continue;
        }
        let mut current = Vec::new();
        for token in tokens {
            if clause_breakers().contains(token.as_str()) {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
            } else {
                current.push(token);
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    out
}

/// Rule-based scene tuple extraction: every noun becomes an object tuple,
/// an adjective immediately before a noun becomes an attribute tuple, and
/// within a clause each verb pairs its nearest preceding and following
/// nouns into a relation tuple.
pub fn extract_tuples(text: &str) -> BTreeSet<SceneTuple> {
    let mut tuples = BTreeSet::new();
    for clause in clauses(text) {
        let classes: Vec<WordClass> = clause.iter().map(|t| classify(t)).collect();
        for (i, token) in clause.iter().enumerate() {
            match classes[i] {
                WordClass::Noun => {
                    tuples.insert(SceneTuple::Object(stem(token)));
                }
                WordClass::Adjective => {
                    if classes.get(i + 1) == Some(&WordClass::Noun) {
                        tuples.insert(SceneTuple::Attribute {
                            object: stem(&clause[i + 1]),
                            attribute: stem(token),
                        });
                    }
                }
                WordClass::Verb => {
                    let subject = (0..i).rev().find(|&k| classes[k] == WordClass::Noun);
                    let object = (i + 1..clause.len()).find(|&k| classes[k] == WordClass::Noun);
                    if let (Some(s), Some(o)) = (subject, object) {
                        tuples.insert(SceneTuple::Relation {
                            subject: stem(&clause[s]),
                            relation: stem(token),
                            object: stem(&clause[o]),
                        });
                    }
                }
                WordClass::Function => {}
            }
        }
    }
    tuples
}

/// F1 over exact stemmed-tuple equality between candidate and reference
/// tuple sets. Two empty sets score a flagged 0.
pub fn spice_lite(candidate: &str, reference: &str) -> ScoredValue {
    let c = extract_tuples(candidate);
    let r = extract_tuples(reference);
    if c.is_empty() && r.is_empty() {
        return ScoredValue::degenerate();
    }
    let overlap = c.intersection(&r).count() as f64;
    ScoredValue::ok(2.0 * overlap / (c.len() + r.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn object(s: &str) -> SceneTuple {
        SceneTuple::Object(s.to_string())
    }

    #[test]
    fn adjective_noun_pair() {
        let tuples = extract_tuples("the tall worker");
        let expected: BTreeSet<SceneTuple> = [
            object("worker"),
            SceneTuple::Attribute {
                object: "worker".to_string(),
                attribute: "tall".to_string(),
            },
        ]
        .into_iter()
        .collect();
        assert_eq!(tuples, expected);
    }

    #[test]
    fn empty_text_has_no_tuples() {
        assert!(extract_tuples("").is_empty());
    }

    #[test]
    fn subject_verb_object_triple() {
        let tuples = extract_tuples("the worker lifts the panel");
        let expected: BTreeSet<SceneTuple> = [
            object("worker"),
            object("panel"),
            SceneTuple::Relation {
                subject: "worker".to_string(),
                relation: "lift".to_string(),
                object: "panel".to_string(),
            },
        ]
        .into_iter()
        .collect();
        assert_eq!(tuples, expected);
    }

    #[test]
    fn inflections_share_stems() {
        let a = extract_tuples("the worker lifts the panel");
        let b = extract_tuples("the workers lifted the panels");
        assert_eq!(a, b);
    }

    #[test]
    fn clause_breakers_scope_relations() {
        // "and" separates the clauses, so "panel" cannot be the object of
        // "bends".
        let tuples = extract_tuples("the worker bends and the panel falls");
        assert!(!tuples.iter().any(|t| matches!(
            t,
            SceneTuple::Relation { subject, .. } if subject == "worker"
        )));
    }

    #[test]
    fn identical_texts_score_one() {
        let s = spice_lite("the worker lifts the panel", "the worker lifts the panel");
        assert_eq!(s.value, 1.0);
        assert!(!s.degenerate);
    }

    #[test]
    fn tuple_disjoint_texts_score_zero() {
        let s = spice_lite("the tall worker", "the heavy ladder");
        assert_eq!(s.value, 0.0);
        assert!(!s.degenerate);
    }

    #[test]
    fn four_sevenths_fixture() {
        // candidate tuples: (worker), (panel), (worker, lift, panel)
        // reference tuples: (worker), (panel), (worker, tall), (worker, carri, panel)
        // overlap 2 of |C|=3, |R|=4 -> F1 = 4/7
        let candidate = "the worker lifts the panel";
        let reference = "the tall worker carries the panel";
        let c = extract_tuples(candidate);
        let r = extract_tuples(reference);
        assert_eq!(c.len(), 3);
        assert_eq!(r.len(), 4);
        assert_eq!(c.intersection(&r).count(), 2);
        let s = spice_lite(candidate, reference);
        assert!((s.value - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn both_empty_tuple_sets_are_flagged() {
        // pure function words produce no tuples on either side
        let s = spice_lite("of the and", "to be or not");
        assert!(s.degenerate);
        assert_eq!(s.value, 0.0);
    }
}
