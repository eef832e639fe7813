//! Converts the three supported source formats to conversation JSONL.

use cer::data::{convert, write_corpus, SourceFormat};

const MELD: &str = "Utterance,Speaker,Emotion,Dialogue_ID,Utterance_ID\n\
                    \"Oh my God, he's lost it.\",Phoebe,sadness,0,0\n\
                    What?,Monica,surprise,0,1\n";

const EMORYNLP: &str = r#"{"episodes":[{"scenes":[{"scene_id":"s01_e01_c01","utterances":[
    {"speakers":["Monica Geller"],"transcript":"There's nothing to tell!","emotion":"Joyful"},
    {"speakers":["Joey Tribbiani"],"transcript":"C'mon, you're going out with the guy!","emotion":"Powerful"}]}]}]}"#;

const TRANSCRIPT: &str = "[Scene: Central Perk]\n\
                          Monica: There's nothing to tell! (laughs)\n\
                          Joey: C'mon.\n\
                          (They all stare.)\n\
                          Chandler: All right Joey, be nice.\n";

fn main() -> cer::Result<()> {
    for (name, text) in [("meld-csv", MELD), ("emorynlp-json", EMORYNLP), ("friends-transcript", TRANSCRIPT)] {
        let format = SourceFormat::parse(name).unwrap();
        let corpus = convert(format, text.as_bytes(), name)?;
        println!("# {name}: {} conversation(s), {} utterances", corpus.len(), corpus.num_utterances());
        write_corpus(std::io::stdout().lock(), &corpus)?;
    }
    Ok(())
}
