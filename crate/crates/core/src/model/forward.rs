use super::pairs::PairSample;
use super::{Model, Side};
use crate::data::EncodedConversation;
use crate::error::{arg, Result};
use crate::nn::{attention_pool, bigru, cross_attend, gate_fuse, si_pair_features};
use crate::tensor::{Real, Rng, Tape, Var};

/// Independent dropout generators for the emotion side, the speaker side
/// and the shared word encoder, so enabling one task never shifts the
/// masks drawn by the other.
#[derive(Clone, Debug)]
pub struct DropoutStreams {
    pub cer: Rng,
    pub si: Rng,
    pub shared: Rng,
}

impl DropoutStreams {
    pub fn new(rng: &Rng) -> Self {
        Self {
            cer: rng.fork_named("dropout.cer"),
            si: rng.fork_named("dropout.si"),
            shared: rng.fork_named("dropout.shared"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CerOutput {
    /// `[N, K]`.
    pub logits: Var,
    /// `[N, K]`, rows sum to one.
    pub probs: Var,
    /// Word attention per utterance.
    pub alpha: Vec<Var>,
    /// `[N, N]` cross attention over the speaker side, when bridged.
    pub beta: Option<Var>,
}

#[derive(Clone, Debug)]
pub struct SiOutput {
    /// `[P, 2]`, one row per pair.
    pub logits: Var,
    pub probs: Var,
}

/// A scalar loss; `has_gradient` is false for the zero placeholder used
/// when nothing was labeled.
#[derive(Clone, Copy, Debug)]
pub struct LossTerm {
    pub value: Var,
    pub has_gradient: bool,
}

/// Forward computation over one conversation.
///
/// Intermediate results are cached, so asking for both tasks' outputs
/// encodes each utterance once per side and runs the shared word encoder
/// once. `dropout == None` means evaluation mode.
pub struct Pass<'a, T> {
    model: &'a Model<T>,
    tape: &'a mut Tape<T>,
    conv: &'a EncodedConversation,
    dropout: Option<&'a mut DropoutStreams>,
    embeds: Vec<Option<Var>>,
    shared: Vec<Option<Var>>,
    individual: [Option<(Var, Vec<Var>)>; 2],
    context: [Option<Var>; 2],
    bridged: [Option<(Var, Option<Var>)>; 2],
}

impl<'a, T: Real> Pass<'a, T> {
    pub fn new(
        model: &'a Model<T>,
        tape: &'a mut Tape<T>,
        conv: &'a EncodedConversation,
        dropout: Option<&'a mut DropoutStreams>,
    ) -> Result<Self> {
        if conv.is_empty() {
            return arg(format!("conversation `{}` is empty", conv.id));
        }
        let n = conv.len();
        Ok(Self {
            model,
            tape,
            conv,
            dropout,
            embeds: vec![None; n],
            shared: vec![None; n],
            individual: [None, None],
            context: [None, None],
            bridged: [None, None],
        })
    }

    pub fn tape(&mut self) -> &mut Tape<T> {
        self.tape
    }

    fn drop(&mut self, x: Var, stream: Option<Side>) -> Result<Var> {
        let rate = self.model.config.dropout;
        let Some(streams) = self.dropout.as_deref_mut() else {
            return Ok(x);
        };
        let rng = match stream {
            Some(Side::Cer) => &mut streams.cer,
            Some(Side::Si) => &mut streams.si,
            None => &mut streams.shared,
        };
        self.tape.dropout(x, rate, true, rng)
    }

    fn embed(&mut self, i: usize) -> Result<Var> {
        if let Some(v) = self.embeds[i] {
            return Ok(v);
        }
        let v = self
            .tape
            .gather(&self.model.store, self.model.params.embedding, &self.conv.tokens[i])?;
        self.embeds[i] = Some(v);
        Ok(v)
    }

    fn shared_words(&mut self, i: usize) -> Result<Var> {
        if let Some(v) = self.shared[i] {
            return Ok(v);
        }
        let model = self.model;
        let bridge = model.params.iue.as_ref().expect("word-level bridge enabled");
        let x = self.embed(i)?;
        let x = self.drop(x, None)?;
        let h = bigru(self.tape, &model.store, x, &bridge.shared)?;
        let h = self.drop(h, None)?;
        self.shared[i] = Some(h);
        Ok(h)
    }

    /// Utterance vectors `[N, 2H_w]` and word attention per utterance.
    pub fn individual(&mut self, side: Side) -> Result<(Var, Vec<Var>)> {
        if let Some(r) = &self.individual[side.index()] {
            return Ok(r.clone());
        }
        let model = self.model;
        let enc = model.params.encoder(side);
        let mut us = Vec::with_capacity(self.conv.len());
        let mut alphas = Vec::with_capacity(self.conv.len());
        for i in 0..self.conv.len() {
            let x = self.embed(i)?;
            let x = self.drop(x, Some(side))?;
            let h = bigru(self.tape, &model.store, x, &enc.word)?;
            let mut h = self.drop(h, Some(side))?;
            if let Some(bridge) = &model.params.iue {
                let shared = self.shared_words(i)?;
                let gate = match side {
                    Side::Cer => &bridge.gate_cer,
                    Side::Si => &bridge.gate_si,
                };
                h = gate_fuse(self.tape, &model.store, h, shared, gate)?;
            }
            let (u, alpha) = attention_pool(self.tape, &model.store, h, &enc.pool)?;
            us.push(u);
            alphas.push(alpha);
        }
        let u = self.tape.stack(&us)?;
        self.individual[side.index()] = Some((u, alphas.clone()));
        Ok((u, alphas))
    }

    /// Contextual utterance vectors `[N, 2H_u]` before any cross attention.
    pub fn contextual(&mut self, side: Side) -> Result<Var> {
        if let Some(v) = self.context[side.index()] {
            return Ok(v);
        }
        let (u, _) = self.individual(side)?;
        let model = self.model;
        let f = bigru(self.tape, &model.store, u, &model.params.encoder(side).utt)?;
        let f = self.drop(f, Some(side))?;
        self.context[side.index()] = Some(f);
        Ok(f)
    }

    /// Final utterance representation of `side` (`[N, 4H_u]` with the
    /// utterance-level bridge, else `[N, 2H_u]`) and its cross attention.
    pub fn representation(&mut self, side: Side) -> Result<(Var, Option<Var>)> {
        if let Some(r) = self.bridged[side.index()] {
            return Ok(r);
        }
        let f = self.contextual(side)?;
        let model = self.model;
        let r = match &model.params.cue {
            Some(bridge) => {
                let other = self.contextual(side.other())?;
                let w = match side {
                    Side::Cer => &bridge.cer,
                    Side::Si => &bridge.si,
                };
                let out = cross_attend(self.tape, &model.store, f, other, w)?;
                (out.output, Some(out.beta))
            }
            None => (f, None),
        };
        self.bridged[side.index()] = Some(r);
        Ok(r)
    }

    pub fn cer(&mut self) -> Result<CerOutput> {
        let (f, beta) = self.representation(Side::Cer)?;
        let (_, alpha) = self.individual(Side::Cer)?;
        let w = self.tape.param(&self.model.store, self.model.params.cer_out);
        let logits = self.tape.matmul(f, w)?;
        let probs = self.tape.softmax(logits)?;
        Ok(CerOutput {
            logits,
            probs,
            alpha,
            beta,
        })
    }

    pub fn si(&mut self, pairs: &[PairSample]) -> Result<Option<SiOutput>> {
        if pairs.is_empty() {
            return Ok(None);
        }
        let model = self.model;
        let Some(head) = &model.params.si_head else {
            return arg("speaker outputs need a multi-task model");
        };
        let n = self.conv.len();
        let (f, _) = self.representation(Side::Si)?;
        let mut deltas = Vec::with_capacity(pairs.len());
        for p in pairs {
            if p.i >= n || p.j >= n || p.i == p.j {
                return arg(format!("pair ({}, {}) invalid for {n} utterances", p.i, p.j));
            }
            let fi = self.tape.row(f, p.i)?;
            let fj = self.tape.row(f, p.j)?;
            deltas.push(si_pair_features(self.tape, fi, fj)?);
        }
        let delta = self.tape.stack(&deltas)?;
        let w_f = self.tape.param(&model.store, head.w_f);
        let b_f = self.tape.param(&model.store, head.b_f);
        let w_out = self.tape.param(&model.store, head.w_out);
        let hidden = self.tape.matmul(delta, w_f)?;
        let hidden = self.tape.add_bias(hidden, b_f)?;
        let hidden = self.tape.relu(hidden);
        let logits = self.tape.matmul(hidden, w_out)?;
        let probs = self.tape.softmax(logits)?;
        Ok(Some(SiOutput { logits, probs }))
    }
}

/// Mean cross entropy over the utterances that carry a gold label.
pub fn loss_cer<T: Real>(tape: &mut Tape<T>, logits: Var, golds: &[Option<usize>]) -> Result<LossTerm> {
    if tape.shape(logits).first() != Some(&golds.len()) {
        return arg(format!(
            "{} gold labels for logits of shape {:?}",
            golds.len(),
            tape.shape(logits)
        ));
    }
    let mut terms = Vec::new();
    for (i, g) in golds.iter().enumerate() {
        if let Some(g) = *g {
            let row = tape.row(logits, i)?;
            terms.push(tape.softmax_cross_entropy(row, g)?);
        }
    }
    mean_or_zero(tape, &terms)
}

/// Mean binary cross entropy over sampled pairs.
pub fn loss_si<T: Real>(tape: &mut Tape<T>, out: Option<&SiOutput>, pairs: &[PairSample]) -> Result<LossTerm> {
    let Some(out) = out else {
        return mean_or_zero(tape, &[]);
    };
    if tape.shape(out.logits).first() != Some(&pairs.len()) {
        return arg("pair count does not match the speaker logits");
    }
    let mut terms = Vec::with_capacity(pairs.len());
    for (k, p) in pairs.iter().enumerate() {
        let row = tape.row(out.logits, k)?;
        terms.push(tape.softmax_cross_entropy(row, p.label())?);
    }
    mean_or_zero(tape, &terms)
}

fn mean_or_zero<T: Real>(tape: &mut Tape<T>, terms: &[Var]) -> Result<LossTerm> {
    if terms.is_empty() {
        return Ok(LossTerm {
            value: tape.zeros(&[]),
            has_gradient: false,
        });
    }
    Ok(LossTerm {
        value: tape.mean(terms)?,
        has_gradient: true,
    })
}

/// `l_cer + l_si`, unweighted.
pub fn loss_multi<T: Real>(tape: &mut Tape<T>, l_cer: LossTerm, l_si: LossTerm) -> Result<LossTerm> {
    Ok(LossTerm {
        value: tape.add(l_cer.value, l_si.value)?,
        has_gradient: l_cer.has_gradient || l_si.has_gradient,
    })
}

/// Evaluation-mode outputs of one conversation, as plain numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub probs: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Option<Vec<Vec<f64>>>,
}

impl Prediction {
    pub fn labels(&self) -> Vec<usize> {
        self.probs
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                    .0
            })
            .collect()
    }
}

fn rows<T: Real>(tape: &Tape<T>, v: Var) -> Vec<Vec<f64>> {
    let cols = *tape.shape(v).last().unwrap_or(&1);
    tape.value(v)
        .chunks(cols)
        .map(|r| r.iter().map(|x| x.as_f64()).collect())
        .collect()
}

impl<T: Real> Model<T> {
    /// Emotion distributions and attention weights without dropout.
    pub fn predict(&self, conv: &EncodedConversation) -> Result<Prediction> {
        let mut tape = Tape::new();
        let out = Pass::new(self, &mut tape, conv, None)?.cer()?;
        Ok(Prediction {
            probs: rows(&tape, out.probs),
            alpha: out
                .alpha
                .iter()
                .map(|&a| tape.value(a).iter().map(|x| x.as_f64()).collect())
                .collect(),
            beta: out.beta.map(|b| rows(&tape, b)),
        })
    }
}
