CONSOLE_CYAN = "\033[96m"
CONSOLE_GREEN = "\033[92m"
CONSOLE_RED = "\033[91m"
CONSOLE_END_COLOR = "\033[0m"

RC_OK = 0
RC_INVALID_ARGUMENT = 1
RC_MISSING_ARTIFACT = 2
RC_INVALID_INPUT = 3
RC_INTERRUPTED = 5
RC_FAILED = 6

KG_STATS_COMMAND = "kg-stats"
GENERATE_COMMAND = "generate"
PRETRAIN_COMMAND = "pretrain"
TRAIN_COMMAND = "train"
EVAL_COMMAND = "eval"
ABLATE_COMMAND = "ablate"
PREDICT_COMMAND = "predict"
SWEEP_COMMAND = "sweep"
COMPARE_COMMAND = "compare"

COMMENT_PREFIX = "#"
FIELD_SEPARATOR = "\t"

CORRUPTION_RETRIES = 100
SEED_RETRIES = 100

CORPUS_FILE = "corpus.jsonl"
TRAIN_FILE = "train.jsonl"
VALID_FILE = "valid.jsonl"
TEST_FILE = "test.jsonl"
EMBEDDINGS_FILE = "embeddings.json.gz"
CHECKPOINT_FILE = "checkpoint.pt"
TRAIN_LOG_FILE = "train_log.jsonl"
REPORT_FILE = "report.json"
ABLATION_FILE = "ablation.json"
SWEEP_FILE = "sweep.json"
COMPARE_FILE = "compare.json"
STATS_FILE = "kg_stats.json"
CONFIG_ECHO_FILE = "config.json"
SYNTHETIC_KG_FILE = "kg.tsv"

CHECKPOINT_VERSION = 1
EMBEDDINGS_VERSION = 1

ADAGRAD_EPS = 1e-8
DIVERGENCE_LIMIT = 1e6

ABLATION_FULL = "full"
ABLATION_NO_LT = "no_Lt"
ABLATION_NO_LD = "no_Ld"
ABLATION_NO_LE = "no_LE"
ABLATION_NO_GSL = "no_GSL"
ABLATION_NO_LSL = "no_LSL"
ABLATION_NO_GSL_LSL = "no_GSL_LSL"
ABLATIONS = (
    ABLATION_FULL,
    ABLATION_NO_LT,
    ABLATION_NO_LD,
    ABLATION_NO_LE,
    ABLATION_NO_GSL,
    ABLATION_NO_LSL,
    ABLATION_NO_GSL_LSL,
)

GRAPH_A = "a"
GRAPH_A2 = "a2"
GRAPH_A_PLUS_A2 = "a_plus_a2"
GRAPH_FULL = "full"
GRAPH_VARIANTS = (GRAPH_A_PLUS_A2, GRAPH_A, GRAPH_A2, GRAPH_FULL)

NORM_SYMMETRIC = "symmetric"
NORM_PRINTED = "printed"
ATTENTION_NORMS = (NORM_SYMMETRIC, NORM_PRINTED)

ATTENTION_ADJ_A = "a"
ATTENTION_ADJ_A_HAT = "a_hat"
ATTENTION_ADJACENCIES = (ATTENTION_ADJ_A, ATTENTION_ADJ_A_HAT)

SIDE_HEAD = "head"
SIDE_TAIL = "tail"

AGGREGATION_MIN = "min"
AGGREGATION_MEAN = "mean"
AGGREGATIONS = (AGGREGATION_MIN, AGGREGATION_MEAN)

SWEEP_PARAMETERS = ("lambda1", "lambda2", "n_heads", "k")

STEP_PRETRAIN_TEXT = "Pretraining"
STEP_ENCODER_TEXT = "Pretraining encoder"
STEP_BASELINE_TEXT = "Training baseline"
STEP_TRAIN_TEXT = "Training"
STEP_GENERATE_TEXT = "Generating"
