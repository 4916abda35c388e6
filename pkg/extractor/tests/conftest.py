import pytest
import torch
from tokenizers import Tokenizer, normalizers, pre_tokenizers, processors
from tokenizers.models import WordPiece
from transformers import BertConfig, BertForMaskedLM, PreTrainedTokenizerFast

WORDS = (
    "[PAD] [UNK] [CLS] [SEP] [MASK] "
    "john mary alice bob carol david eve frank grace henry "
    "acme globex initech hooli umbrella stark wayne oscorp "
    "paris london berlin oslo madrid rome lisbon dublin "
    "works worked at founded founder was born in runs the a an is of and on "
    "site event earned degree from university wollongong died city company "
    "leader visited met joined left wrote spoke about for with new old their "
    "big small team office year when during market because really also "
    "##s ##ing ##ton ##er . , ' ;"
).split()


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A small randomly initialized masked LM saved to disk, loadable by name."""
    vocab = {w: i for i, w in enumerate(WORDS)}
    tok = Tokenizer(WordPiece(vocab, unk_token="[UNK]"))
    tok.normalizer = normalizers.BertNormalizer(lowercase=True)
    tok.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    tok.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok,
        pad_token="[PAD]",
        unk_token="[UNK]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )
    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=96,
    )
    model = BertForMaskedLM(config)
    model.eval()
    out = tmp_path_factory.mktemp("tiny_mlm")
    model.save_pretrained(out)
    fast.save_pretrained(out)
    return str(out)
