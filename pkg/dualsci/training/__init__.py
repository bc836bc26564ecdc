from .data import TrainPair, build_corpus, corpus_manifest, load_luma, synth_corpus, synth_scene
from .gradcheck import assembly_grad_check, grad_check, module_grad_check
from .loop import TrainResult, loss, loss_terms, make_batch, read_train_log, train
