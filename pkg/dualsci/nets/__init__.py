from .ablation import ablation_variants, parse_flags, single_flag_variants
from .assembly import DualViewModel, ModelOutput, Reconstruction, load_model, reconstruct, save_model
from .refine import RefineCell, cell_step, refine, refine_view, refine_views
from .separator import Separator, SeparatorBranch, assemble_inputs, assemble_single_branch_input, separate, separate_single_branch
from .weights import WeightStore
