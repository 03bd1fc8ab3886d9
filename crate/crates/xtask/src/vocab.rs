//! Seed vocabulary for the synthetic corpus. Each entry is a canonical name
//! followed by surface variants a model might produce for it. No string
//! appears on two disks.

pub type Entry = (&'static str, &'static [&'static str]);

pub const THEMES: &[Entry] = &[
    ("few-shot", &["few-shot learning", "learning from few examples"]),
    ("long-tail", &["long-tail distribution"]),
    ("less is more", &[]),
    ("in-the-wild", &[]),
    ("self-refine", &["self-refinement", "iterative self-refinement"]),
    ("look-ahead", &[]),
    ("hindsight", &[]),
    ("memory", &["long-term memory"]),
    ("rethinking", &[]),
    ("weak-to-strong", &["weak to strong generalization"]),
    ("granularity", &[]),
    ("in-context learning", &["ICL"]),
    ("reference-free", &[]),
    ("grokking", &[]),
    ("self-evolving", &["self-evolution"]),
    ("compositionality", &["compositional generalization"]),
    ("multi-hop", &[]),
    ("modularity", &[]),
    ("robustness", &["adversarial robustness"]),
    ("interpretability", &["explainability"]),
    ("efficiency", &["computational efficiency"]),
    ("scaling laws", &[]),
    ("curriculum", &["curriculum learning"]),
    ("uncertainty", &["uncertainty estimation"]),
    ("alignment", &[]),
    ("faithfulness", &[]),
    ("controllability", &[]),
    ("personalization", &[]),
    ("multilinguality", &["cross-lingual transfer"]),
    ("data contamination", &[]),
    ("emergent abilities", &[]),
    ("transferability", &[]),
    ("zero-shot", &["zero-shot transfer"]),
    ("continual learning", &["lifelong learning"]),
    ("privacy", &[]),
    ("fairness", &[]),
    ("sparsity", &[]),
    ("test-time compute", &["inference-time scaling"]),
    ("consistency", &[]),
    ("shortcut learning", &[]),
];

pub const DOMAINS: &[Entry] = &[
    ("question answering", &["QA", "open-domain QA"]),
    ("argument mining", &[]),
    ("planning", &[]),
    ("retrieval-augmented generation", &["RAG", "retrieval augmentation"]),
    ("calibration", &[]),
    ("reasoning", &[]),
    ("safety", &["AI safety"]),
    ("debate", &[]),
    ("memorization", &[]),
    ("automated research", &[]),
    ("machine translation", &["MT", "neural machine translation"]),
    ("summarization", &[]),
    ("dialogue systems", &["conversational agents"]),
    ("code generation", &[]),
    ("information extraction", &[]),
    ("sentiment analysis", &[]),
    ("fact verification", &["fact checking"]),
    ("text classification", &[]),
    ("named entity recognition", &["NER"]),
    ("commonsense reasoning", &[]),
    ("mathematical reasoning", &["math word problems"]),
    ("instruction following", &[]),
    ("hallucination detection", &[]),
    ("misinformation", &[]),
    ("clinical NLP", &["medical NLP"]),
    ("legal NLP", &[]),
    ("education", &[]),
    ("speech recognition", &[]),
    ("image captioning", &[]),
    ("visual question answering", &["VQA"]),
    ("tool use", &[]),
    ("web agents", &[]),
    ("recommendation", &[]),
    ("story generation", &[]),
    ("evaluation", &["benchmarking"]),
    ("data annotation", &[]),
    ("low-resource languages", &[]),
    ("social bias", &[]),
    ("peer review", &[]),
    ("scientific discovery", &[]),
];

pub const METHODS: &[Entry] = &[
    ("large language models", &["LLMs", "LLM"]),
    ("Mamba", &[]),
    ("RWKV", &[]),
    ("self-attention", &[]),
    ("transformers", &[]),
    ("contrastive learning", &[]),
    ("reinforcement learning from human feedback", &["RLHF"]),
    ("direct preference optimization", &["DPO"]),
    ("chain-of-thought prompting", &["chain-of-thought", "CoT"]),
    ("knowledge distillation", &["distillation"]),
    ("mixture of experts", &["MoE"]),
    ("low-rank adaptation", &["LoRA"]),
    ("diffusion models", &[]),
    ("graph neural networks", &["GNNs"]),
    ("variational autoencoders", &[]),
    ("beam search", &[]),
    ("Monte Carlo tree search", &["MCTS"]),
    ("dense retrievers", &[]),
    ("instruction tuning", &[]),
    ("prompt tuning", &[]),
    ("adapters", &[]),
    ("state space models", &["SSMs"]),
    ("energy-based models", &[]),
    ("sparse autoencoders", &[]),
    ("probing classifiers", &[]),
    ("data augmentation", &[]),
    ("synthetic data", &[]),
    ("reward models", &[]),
    ("process supervision", &[]),
    ("speculative decoding", &[]),
    ("quantization", &[]),
    ("pruning", &[]),
    ("knowledge graphs", &[]),
    ("vision-language models", &["VLMs"]),
    ("multi-agent debate", &[]),
    ("Bayesian inference", &[]),
    ("optimal transport", &[]),
    ("meta-learning", &[]),
    ("active learning", &[]),
    ("contrastive decoding", &[]),
];

/// Title templates in slot notation.
pub const TEMPLATES: &[&str] = &[
    "A1 B1 via C1",
    "Rethinking B1 with C1",
    "C1 for A1 B1",
    "Comparing C1 and C2 in B1 with A1",
    "Towards A1 B1: A C1 Approach",
    "When C1 Meets B1: An A1 Perspective",
    "A1 C1 Improves B1",
    "Can C1 Do A1 B1?",
    "B1 with A1 C1",
    "On the A1 of C1 in B1",
    "A1 and A2 for B1 with C1",
    "Learning B1 from A1 Signals via C1",
];

/// (venue, year, papers)
pub const VENUES: &[(&str, i32, usize)] =
    &[("ACL", 2024, 40), ("ACL", 2023, 20), ("ICLR", 2024, 25), ("COLM", 2024, 15)];
