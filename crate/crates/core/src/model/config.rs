use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadVariant {
    /// Classifier on the final-layer state at each target position.
    Sequence,
    /// Extra dense layer and saturating activation before the classifier.
    Pooled,
    /// Target state concatenated with a projected genre vote vector.
    GenreConcat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenreMode {
    None,
    /// Vote-share vector fed to the genre-concat head.
    Vector,
    /// Genre aliases appended to the input text.
    TextAppend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolerActivation {
    Tanh,
    Identity,
}

macro_rules! text_enum {
    ($ty:ty { $($variant:ident => $($text:literal)|+),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let names: &[&str] = match self { $(Self::$variant => &[$($text),+]),+ };
                f.write_str(names[0])
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($($text)|+ => Ok(Self::$variant),)+
                    other => Err(Error::invalid(format!(
                        "unknown {} {other:?}", stringify!($ty)
                    ))),
                }
            }
        }
    };
}

text_enum!(HeadVariant { Sequence => "sequence", Pooled => "pooled", GenreConcat => "genre-concat" | "genre_concat" });
text_enum!(GenreMode { None => "none", Vector => "vector", TextAppend => "append" | "text-append" | "text_append" });
text_enum!(PoolerActivation { Tanh => "tanh", Identity => "identity" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub width: usize,
    pub ff_width: usize,
    pub dropout: f64,
    pub max_positions: usize,
    pub vocab_size: usize,
    pub head: HeadVariant,
    pub genre_mode: GenreMode,
    pub genre_width: usize,
    pub pooler_activation: PoolerActivation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            heads: 4,
            width: 64,
            ff_width: 128,
            dropout: 0.1,
            max_positions: 128,
            vocab_size: 4,
            head: HeadVariant::Sequence,
            genre_mode: GenreMode::None,
            genre_width: 32,
            pooler_activation: PoolerActivation::Tanh,
        }
    }
}

impl ModelConfig {
    pub fn head_width(&self) -> usize {
        self.width / self.heads
    }

    /// Input width of the final classifier.
    pub fn classifier_width(&self) -> usize {
        match self.head {
            HeadVariant::GenreConcat => self.width + self.genre_width,
            _ => self.width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.layers == 0 || self.heads == 0 || self.width == 0 || self.ff_width == 0 {
            return fail("layers, heads, width and ff_width must be positive".into());
        }
        if self.width % self.heads != 0 {
            return fail(format!(
                "width {} is not divisible by {} heads",
                self.width, self.heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.max_positions < 3 {
            return fail("max_positions must be at least 3".into());
        }
        if self.vocab_size < 4 {
            return fail("vocab_size must include the 4 reserved tokens".into());
        }
        let genre_head = self.head == HeadVariant::GenreConcat;
        let vector_mode = self.genre_mode == GenreMode::Vector;
        if genre_head != vector_mode {
            return fail(format!(
                "genre mode {} is incompatible with head {} (the vector mode needs the genre-concat head and vice versa)",
                self.genre_mode, self.head
            ));
        }
        if genre_head && self.genre_width == 0 {
            return fail("genre_width must be positive".into());
        }
        Ok(())
    }
}
