//! Topic-model interpretation of model confidences.

pub mod analysis;
pub mod coherence;
pub mod lda;

pub use analysis::{
    bin_index, class_topic_scores, class_topics, confidence_curve, correlations, pearson, top_words, Bin, BinnedCurve,
    ClassTopicResult, CorrelationMatrix, CorrelationMethod, Thetas,
};
pub use coherence::{coherence, npmi, select_k, Coherence, Selection};
pub use lda::{
    read_topic_model, train_lda, write_topic_model, write_topic_model_with, GibbsSampler, LdaConfig, LdaCorpus,
    TopicModel,
};
