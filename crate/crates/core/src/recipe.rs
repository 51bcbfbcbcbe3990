//! Training hyperparameters handed to an external detector trainer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayGroup {
    pub params: u32,
    /// `weight` or `bias`.
    pub kind: String,
    pub weight_decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecipe {
    pub detector_family: String,
    pub epochs: u32,
    pub optimizer: String,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: u32,
    pub image_size: u32,
    pub weight_decay_groups: Vec<DecayGroup>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid recipe: {0}")]
pub struct RecipeError(String);

impl Default for TrainingRecipe {
    /// YOLOv8-large on 640x640 inputs, 200 epochs of AdamW.
    fn default() -> Self {
        let group = |params, kind: &str, weight_decay| DecayGroup {
            params,
            kind: kind.to_owned(),
            weight_decay,
        };
        Self {
            detector_family: "YOLOv8l".to_owned(),
            epochs: 200,
            optimizer: "AdamW".to_owned(),
            learning_rate: 7.14e-4,
            momentum: 0.9,
            batch_size: 200,
            image_size: 640,
            weight_decay_groups: vec![
                group(97, "weight", 0.0),
                group(104, "weight", 0.0015625),
                group(103, "bias", 0.0),
            ],
        }
    }
}

impl TrainingRecipe {
    pub fn check(&self) -> Result<(), RecipeError> {
        let positive = [
            ("epochs", self.epochs as f64),
            ("learning_rate", self.learning_rate),
            ("momentum", self.momentum),
            ("batch_size", self.batch_size as f64),
            ("image_size", self.image_size as f64),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(RecipeError(format!("{name} must be positive, got {v}")));
        }
        for g in &self.weight_decay_groups {
            if g.params == 0 || !(g.weight_decay.is_finite() && g.weight_decay >= 0.0) {
                return Err(RecipeError(format!("bad decay group {g:?}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("recipe serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, RecipeError> {
        let r: Self = serde_json::from_str(text).map_err(|e| RecipeError(e.to_string()))?;
        r.check()?;
        Ok(r)
    }
}
