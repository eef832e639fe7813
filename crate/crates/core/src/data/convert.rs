use std::collections::BTreeMap;
use std::io::{BufRead, Read};

use serde_json::Value;

use super::corpus::{Conversation, Corpus, LabelSet, Utterance};
use crate::error::{Error, Result};

/// Native corpus formats understood by [`convert`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceFormat {
    /// MELD-style CSV with `Utterance`, `Speaker`, `Emotion`, `Dialogue_ID`
    /// and `Utterance_ID` columns. Other columns are ignored.
    MeldCsv,
    /// EmoryNLP JSON: `episodes[].scenes[].utterances[]` with `speakers`,
    /// `transcript` and `emotion`.
    EmoryNlpJson,
    /// Plain `Speaker: line` transcripts. A blank line or a line starting
    /// with `[` starts a new scene. Parenthesised stage directions are
    /// removed. No emotion labels.
    FriendsTranscript,
}

impl SourceFormat {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "meld-csv" => Some(Self::MeldCsv),
            "emorynlp-json" => Some(Self::EmoryNlpJson),
            "friends-transcript" => Some(Self::FriendsTranscript),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::MeldCsv => "meld-csv",
            Self::EmoryNlpJson => "emorynlp-json",
            Self::FriendsTranscript => "friends-transcript",
        }
    }

    /// The label inventory emitted by this format.
    pub fn labels(self) -> LabelSet {
        match self {
            Self::MeldCsv => LabelSet::meld(),
            Self::EmoryNlpJson | Self::FriendsTranscript => LabelSet::emorynlp(),
        }
    }
}

/// Reads a native corpus. `source` names the input in error messages.
pub fn convert<R: BufRead>(format: SourceFormat, reader: R, source: &str) -> Result<Corpus> {
    match format {
        SourceFormat::MeldCsv => meld_csv(reader, source),
        SourceFormat::EmoryNlpJson => emorynlp_json(reader, source),
        SourceFormat::FriendsTranscript => friends_transcript(reader, source),
    }
}

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

fn meld_csv<R: Read>(reader: R, source: &str) -> Result<Corpus> {
    let labels = LabelSet::meld();
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr
        .byte_headers()
        .map_err(|e| parse_err(source, 1, e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| String::from_utf8_lossy(h).trim() == name)
            .ok_or_else(|| parse_err(source, 1, format!("missing column `{name}`")))
    };
    let c_text = column("Utterance")?;
    let c_speaker = column("Speaker")?;
    let c_emotion = column("Emotion")?;
    let c_dialogue = column("Dialogue_ID")?;
    let c_utt = column("Utterance_ID")?;

    let mut dialogues: BTreeMap<u64, Vec<(u64, Utterance)>> = BTreeMap::new();
    let mut record = csv::ByteRecord::new();
    loop {
        let more = rdr
            .read_byte_record(&mut record)
            .map_err(|e| parse_err(source, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |c: usize| String::from_utf8_lossy(&record[c]).trim().to_string();
        let int = |c: usize, name: &str| {
            field(c)
                .parse::<u64>()
                .map_err(|_| parse_err(source, line, format!("`{name}` is not an integer: `{}`", field(c))))
        };
        let dialogue = int(c_dialogue, "Dialogue_ID")?;
        let utt = int(c_utt, "Utterance_ID")?;
        let speaker = field(c_speaker);
        if speaker.is_empty() {
            return Err(parse_err(source, line, "empty `Speaker`"));
        }
        let label = field(c_emotion);
        let emotion = labels.index(&label).ok_or_else(|| Error::UnknownLabel {
            path: source.to_string(),
            line,
            label: label.clone(),
        })?;
        dialogues
            .entry(dialogue)
            .or_default()
            .push((utt, Utterance::new(speaker, field(c_text), Some(emotion))));
    }
    let mut corpus = Corpus::new(labels);
    for (id, mut utts) in dialogues {
        utts.sort_by_key(|(u, _)| *u);
        corpus.conversations.push(Conversation {
            id: format!("dia{id}"),
            utterances: utts.into_iter().map(|(_, u)| u).collect(),
        });
    }
    Ok(corpus)
}

fn emorynlp_json<R: Read>(reader: R, source: &str) -> Result<Corpus> {
    let labels = LabelSet::emorynlp();
    let root: Value = serde_json::from_reader(reader).map_err(|e| parse_err(source, e.line(), e.to_string()))?;
    let at = |loc: &str, msg: &str| parse_err(source, 0, format!("{loc}: {msg}"));
    let array = |v: &Value, key: &str, loc: &str| -> Result<Vec<Value>> {
        v.get(key)
            .and_then(Value::as_array)
            .cloned()
            .ok_or_else(|| at(loc, &format!("missing array `{key}`")))
    };
    let mut corpus = Corpus::new(labels.clone());
    for (e, episode) in array(&root, "episodes", "$")?.iter().enumerate() {
        let eloc = format!("episodes[{e}]");
        for (s, scene) in array(episode, "scenes", &eloc)?.iter().enumerate() {
            let sloc = format!("{eloc}.scenes[{s}]");
            let id = scene
                .get("scene_id")
                .and_then(Value::as_str)
                .map_or_else(|| format!("e{e}_s{s}"), str::to_string);
            let mut utterances = Vec::new();
            for (u, utt) in array(scene, "utterances", &sloc)?.iter().enumerate() {
                let uloc = format!("{sloc}.utterances[{u}]");
                let text = utt
                    .get("transcript")
                    .and_then(Value::as_str)
                    .ok_or_else(|| at(&uloc, "missing string `transcript`"))?;
                let speaker = utt
                    .get("speakers")
                    .and_then(Value::as_array)
                    .ok_or_else(|| at(&uloc, "missing array `speakers`"))?
                    .first()
                    .and_then(Value::as_str)
                    .ok_or_else(|| at(&uloc, "no speaker"))?;
                let emotion = match utt.get("emotion").and_then(Value::as_str) {
                    None => None,
                    Some(l) => Some(labels.index(l).ok_or_else(|| Error::UnknownLabel {
                        path: format!("{source}:{uloc}"),
                        line: 0,
                        label: l.to_string(),
                    })?),
                };
                utterances.push(Utterance::new(speaker, text, emotion));
            }
            if !utterances.is_empty() {
                corpus.conversations.push(Conversation { id, utterances });
            }
        }
    }
    Ok(corpus)
}

fn strip_parentheticals(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '(' => depth += 1,
            ')' if depth > 0 => depth -= 1,
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn friends_transcript<R: BufRead>(reader: R, source: &str) -> Result<Corpus> {
    let mut corpus = Corpus::new(LabelSet::emorynlp());
    let mut scene: Vec<Utterance> = Vec::new();
    let flush = |scene: &mut Vec<Utterance>, corpus: &mut Corpus| {
        if !scene.is_empty() {
            let id = format!("scene{}", corpus.conversations.len());
            corpus.conversations.push(Conversation {
                id,
                utterances: std::mem::take(scene),
            });
        }
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| parse_err(source, i + 1, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('[') {
            flush(&mut scene, &mut corpus);
            continue;
        }
        if trimmed.starts_with('(') {
            continue;
        }
        let Some((speaker, text)) = trimmed.split_once(':') else {
            return Err(parse_err(source, i + 1, "expected `Speaker: text`"));
        };
        let speaker = speaker.trim();
        if speaker.is_empty() {
            return Err(parse_err(source, i + 1, "empty speaker"));
        }
        scene.push(Utterance::new(speaker, strip_parentheticals(text), None));
    }
    flush(&mut scene, &mut corpus);
    Ok(corpus)
}
