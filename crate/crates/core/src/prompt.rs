//! Shipped prompt templates and the small helpers that fill and parse them.

use serde::de::{Deserialize, Deserializer, MapAccess, Visitor};
use serde_json::{Map, Value};

pub const EXTRACTION: &str = include_str!("../prompts/extraction.txt");
pub const MERGE: &str = include_str!("../prompts/merge.txt");
pub const REWRITE: &str = include_str!("../prompts/rewrite.txt");
pub const DECOMPOSITION: &str = include_str!("../prompts/decomposition.txt");
pub const RECONSTRUCTION: &str = include_str!("../prompts/reconstruction.txt");

/// Substitute `{name}` placeholders in a single left-to-right pass over the
/// template. Values are never rescanned, so a title containing `{abstract}`
/// stays literal. Braces that do not form a known placeholder are copied.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    'scan: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        for (name, value) in values {
            let len = name.len() + 2;
            if tail.len() >= len && tail.as_bytes()[len - 1] == b'}' && &tail[1..len - 1] == *name {
                out.push_str(value);
                rest = &tail[len..];
                continue 'scan;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

/// First JSON object embedded anywhere in `text`: surrounding prose and code
/// fences are skipped by trying each `{` as a parse start.
pub fn first_json_object(text: &str) -> Option<Map<String, Value>> {
    text.char_indices().filter(|&(_, c)| c == '{').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}

/// A JSON object with its keys in document order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrderedObject(pub Vec<(String, Value)>);

impl<'de> Deserialize<'de> for OrderedObject {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = OrderedObject;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<OrderedObject, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    entries.push((k, v));
                }
                Ok(OrderedObject(entries))
            }
        }
        deserializer.deserialize_map(V)
    }
}

/// Like [`first_json_object`] but keeps key order.
pub fn first_ordered_object(text: &str) -> Option<OrderedObject> {
    text.char_indices().filter(|&(_, c)| c == '{').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<OrderedObject>();
        stream.next().and_then(Result::ok)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_is_single_pass() {
        let got = fill("T={title} A={abstract} J={\"x\": 1}", &[("title", "{abstract}"), ("abstract", "abs")]);
        assert_eq!(got, "T={abstract} A=abs J={\"x\": 1}");
    }

    #[test]
    fn fill_leaves_unknown_braces() {
        assert_eq!(fill("{a}{b}{", &[("a", "1")]), "1{b}{");
    }

    #[test]
    fn finds_object_inside_fences_and_prose() {
        let text = "Sure! Here it is:\n```json\n{\"A\": [\"x\"]}\n```\nDone {not json";
        let obj = first_json_object(text).unwrap();
        assert_eq!(obj["A"][0], "x");
        assert!(first_json_object("no braces").is_none());
        assert!(first_json_object("{broken").is_none());
    }

    #[test]
    fn ordered_object_keeps_document_order() {
        let obj = first_ordered_object("x {\"b\": [1], \"a\": [2]}").unwrap();
        let keys: Vec<_> = obj.0.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["b", "a"]);
    }

    #[test]
    fn shipped_templates_have_their_placeholders() {
        assert!(EXTRACTION.contains("Title: {title}\n\nAbstract: {abstract}\n\nOutput:"));
        assert!(MERGE.contains("{domain}:\n{keywords}\n"));
        assert!(REWRITE.contains("Please output one title only"));
        assert!(DECOMPOSITION.contains("PAPER TITLE: \"{title}\""));
        assert!(RECONSTRUCTION.contains("METHODOLOGIES: {methodologies}"));
    }
}
