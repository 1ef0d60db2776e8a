mod tokens;
mod vocab;

pub use tokens::{
    decode, decode_position, encode, encode_frames, position_id, position_layout, read_tokens, write_tokens,
    FrameSource, SubbandSlot, Token, TokenSequence,
};
pub use vocab::{fit_vocab, quantile_sorted, CoeffVocabulary, Vocabulary, APPROX_KEY};
