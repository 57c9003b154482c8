"""Pearl's causal hierarchy: languages, exact evaluation, bounded satisfiability and reductions."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Add,
    And,
    Atom,
    CondProb,
    Const,
    Document,
    Eq,
    FAnd,
    FNot,
    FOr,
    FragmentTag,
    Implies,
    Le,
    Lt,
    Mechanism,
    Mul,
    Neg,
    Not,
    Or,
    PostInt,
    Prob,
    Scm,
    Signature,
    Sum,
    Top,
    Unknown,
    classify_fragment,
    desugar,
    substitute_dummy,
    validate,
)
from .errors import *  # noqa: E402,F401,F403
from .evaluate import (  # noqa: E402
    apply_intervention,
    determine_values,
    eval_formula,
    eval_l2_sums_by_interventions,
    eval_term,
    joint_distribution,
    satisfies,
)
from .parser import (  # noqa: E402
    dump_model,
    load_document,
    load_model,
    parse_document,
    parse_formula,
    parse_model,
    print_document,
    print_formula,
)
from .solve import (  # noqa: E402
    Bounds,
    NotValid,
    Sat,
    UnsatWithinBounds,
    ValidWithinBounds,
    check_sat,
    check_sat_causal,
    check_sat_l1,
    check_sat_l1_negfree,
    check_sat_poly,
    check_validity,
    decompose_sum_l1,
)
from .transform import eliminate_conditionals, expand_sums  # noqa: E402
