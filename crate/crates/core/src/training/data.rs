use crate::corpus::{UserInfoDictionary, Utterance, Vocab};
use crate::distill::{Distiller, PriorDistanceTable};
use crate::error::{Error, Result};
use crate::gazetteer::Gazetteer;
use crate::model::{predicted_table, Baseline, DeltaSource, Prediction, ProgModel};

/// Vocabularies and lookup resources shared by training and evaluation.
#[derive(Clone, Debug)]
pub struct Context {
    pub vocab: Vocab,
    pub dictionary: UserInfoDictionary,
    pub gazetteer: Gazetteer,
}

/// An utterance with its ids and gold distance table.
#[derive(Clone, Debug)]
pub struct Example {
    pub utterance: Utterance,
    pub tokens: Vec<usize>,
    pub info: Vec<usize>,
    /// `None` when a gold slot tag is outside the vocabulary.
    pub slots: Option<Vec<usize>>,
    pub intent: Option<usize>,
    pub gold_table: PriorDistanceTable,
}

impl Context {
    pub fn new(vocab: Vocab, dictionary: UserInfoDictionary, gazetteer: Gazetteer) -> Self {
        Context {
            vocab,
            dictionary,
            gazetteer,
        }
    }

    /// Builds the vocabulary from `train`.
    pub fn from_training_data(
        train: &[Utterance],
        dictionary: UserInfoDictionary,
        gazetteer: Gazetteer,
    ) -> Self {
        let vocab = Vocab::build(train, &dictionary);
        Context::new(vocab, dictionary, gazetteer)
    }

    pub fn distiller(&self) -> Distiller<'_> {
        Distiller::new(&self.dictionary, &self.gazetteer)
    }

    pub fn example(&self, u: &Utterance) -> Result<Example> {
        let e = self.vocab.encode(u, &self.dictionary);
        let gold_table = self.distiller().gold_table(u)?;
        Ok(Example {
            utterance: u.clone(),
            tokens: e.tokens,
            info: e.info,
            slots: e.slots,
            intent: e.intent,
            gold_table,
        })
    }

    pub fn examples(&self, data: &[Utterance]) -> Result<Vec<Example>> {
        data.iter().map(|u| self.example(u)).collect()
    }

    /// Inference as deployed: the Prog model measures distances on its own
    /// predicted info tags; baselines read the gold table (only the
    /// concat-info variant uses it).
    pub fn predict(&self, model: &ProgModel, ex: &Example) -> Result<Prediction> {
        if model.config().baseline != Baseline::None {
            return model.predict(&ex.tokens, DeltaSource::Table(&ex.gold_table));
        }
        let distiller = self.distiller();
        let from_pred =
            |ids: &[usize]| predicted_table(&distiller, &ex.utterance, &self.vocab.info, ids);
        model.predict(&ex.tokens, DeltaSource::Predicted(&from_pred))
    }

    pub fn slot_labels(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.vocab.slots.label(i).to_string())
            .collect()
    }

    pub fn info_labels(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.vocab.info.label(i).to_string())
            .collect()
    }

    pub fn intent_label(&self, id: usize) -> &str {
        self.vocab.intents.label(id)
    }
}

impl Example {
    /// Gold slot and intent ids, required for training.
    pub fn targets(&self) -> Result<(&[usize], usize)> {
        match (&self.slots, self.intent) {
            (Some(s), Some(i)) => Ok((s, i)),
            _ => Err(Error::Config(format!(
                "utterance {:?} has labels outside the training vocabulary",
                self.utterance.text()
            ))),
        }
    }
}
