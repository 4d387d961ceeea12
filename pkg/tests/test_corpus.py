import io
import random
from unittest import TestCase

from ner_bootstrap.corpus import (
    REPAIR,
    TEST,
    TRAIN,
    VALIDATION,
    Corpus,
    EntityMention,
    EntityType,
    Label,
    align_mention,
    attach_gold_entities,
    corpus_stats,
    format_stats,
    is_bio_valid,
    parse_bio,
    project_bio,
    read_corpus,
    read_gold_entities,
    render_mentions,
    validate_corpus,
    write_corpus,
    write_gold_entities
)
from ner_bootstrap.exceptions import (
    InvalidBio,
    InvalidCorpus,
    OverlapConflict
)
from ner_bootstrap.ingest import tokenize
from six.moves import range
from tests.setup import create_fixture, make_sentence

B_PER, I_PER, B_LOC, I_LOC, O = (
    Label.B_PER, Label.I_PER, Label.B_LOC, Label.I_LOC, Label.O
)


class BioTestCase(TestCase):

    def setUp(self):
        self.tokens = tokenize('Jan z Kralup prodal dvůr v Praze .')

    def test_parse(self):
        mentions = parse_bio(
            [B_PER, I_PER, I_PER, O, O, O, B_LOC, O], self.tokens
        )
        self.assertEqual(
            [(m.entity_type, m.char_start, m.char_end) for m in mentions],
            [(EntityType.PER, 0, 12), (EntityType.LOC, 26, 31)]
        )

    def test_adjacent_begin_tags(self):
        mentions = parse_bio(
            [B_PER, B_PER, O, O, O, O, O, O], self.tokens
        )
        self.assertEqual(2, len(mentions))

    def test_strict_rejects_stray_inside(self):
        with self.assertRaises(InvalidBio) as context:
            parse_bio([O, I_PER, O, O, O, O, O, O], self.tokens)
        self.assertEqual(1, context.exception.position)

    def test_inside_of_other_type_is_invalid(self):
        with self.assertRaises(InvalidBio):
            parse_bio([B_PER, I_LOC, O, O, O, O, O, O], self.tokens)

    def test_repair_promotes_stray_inside(self):
        mentions = parse_bio(
            [O, I_PER, I_PER, O, O, O, O, O], self.tokens, REPAIR
        )
        self.assertEqual([(2, 12)], [
            (m.char_start, m.char_end) for m in mentions
        ])

    def test_project_overlap(self):
        with self.assertRaises(OverlapConflict):
            project_bio(self.tokens, [
                EntityMention('PER', 0, 12),
                EntityMention('LOC', 6, 12)
            ])

    def test_align_mention_expands_to_tokens(self):
        aligned = align_mention(self.tokens, EntityMention('PER', 2, 8))
        self.assertEqual((0, 12), (aligned.char_start, aligned.char_end))
        self.assertIsNone(
            align_mention(self.tokens, EntityMention('LOC', 3, 4))
        )

    def test_project_parse_round_trip(self):
        rng = random.Random(11)
        for _ in range(10000):
            count = rng.randint(1, 12)
            tokens = tokenize(' '.join('w%d' % i for i in range(count)))
            mentions = []
            position = 0
            while position < count:
                position += rng.randint(0, 2)
                if position >= count:
                    break
                length = rng.randint(1, min(3, count - position))
                mentions.append(EntityMention(
                    rng.choice((EntityType.PER, EntityType.LOC)),
                    tokens[position].char_start,
                    tokens[position + length - 1].char_end
                ))
                position += length
            tags = project_bio(tokens, mentions)
            self.assertTrue(is_bio_valid(tags))
            self.assertEqual(mentions, parse_bio(tags, tokens))


class CorpusFileTestCase(TestCase):

    def setUp(self):
        self.fixture = create_fixture()
        self.gold = read_corpus(self.fixture.gold_path)

    def test_stats(self):
        stats = corpus_stats(self.gold)
        self.assertEqual((10, 7, 7), tuple(stats['total']))
        self.assertEqual((8, 5, 5), tuple(stats[TRAIN]))
        self.assertEqual((1, 1, 1), tuple(stats[VALIDATION]))
        self.assertEqual((1, 1, 1), tuple(stats[TEST]))

    def test_format_stats(self):
        text = format_stats([('toy-gold', corpus_stats(self.gold))])
        lines = text.splitlines()
        self.assertEqual(['Corpus', '#', 'Sentences', '#', 'B-PER', '#',
                          'B-LOC'], lines[0].split())
        self.assertEqual(['toy-gold', '10', '7', '7'], lines[1].split())
        self.assertEqual(['Training', '8', '5', '5'], lines[2].split())
        self.assertNotIn('Unassigned', text)

    def test_header_metadata(self):
        self.assertEqual('toy-gold', self.gold.name)
        self.assertEqual('0', self.gold.metadata['seed'])

    def test_write_read_round_trip(self):
        sentence = make_sentence(
            'd1:0', ['Jan', 'z', 'Kralup', ','], [B_PER, I_PER, I_PER, O]
        )
        sentence = sentence._replace(text='Jan  z\tKralup,')
        sentence = sentence._replace(tokens=tokenize(sentence.text))
        corpus = Corpus('c', [sentence], [TRAIN])
        buffer = io.StringIO()
        write_corpus(corpus, buffer)
        buffer.seek(0)
        again = read_corpus(buffer)
        # tabs are flattened, offsets are kept
        self.assertEqual('Jan  z Kralup,', again.sentences[0].text)
        self.assertEqual(
            [t[1:] for t in sentence.tokens],
            [t[1:] for t in again.sentences[0].tokens]
        )
        self.assertEqual(sentence.tags, again.sentences[0].tags)
        self.assertEqual((TRAIN, ), again.splits)

    def test_unknown_label(self):
        buffer = io.StringIO(u'# id=a:0 doc=a lang=cs split=train\nJan\tB-ORG\n')
        with self.assertRaises(InvalidCorpus):
            read_corpus(buffer)

    def test_duplicate_sentence_id(self):
        sentence = self.gold.sentences[0]
        with self.assertRaises(InvalidCorpus):
            validate_corpus(Corpus('c', [sentence, sentence]))

    def test_gold_entities(self):
        entities = read_gold_entities(self.fixture.gold_entities_path)
        corpus = attach_gold_entities(self.gold, entities)
        sentence = [
            s for s in corpus.sentences if s.sentence_id == 'abs4:0'
        ][0]
        tops = sentence.gold_mentions()
        self.assertEqual(2, len(tops))
        self.assertEqual('Mikuláš z Brna', sentence.covered(tops[0]))
        nested = tops[0].nested[0]
        self.assertEqual(EntityType.LOC, nested.entity_type)
        self.assertEqual('Brna', sentence.covered(nested))
        # sentences without sidecar records fall back to their tags
        other = corpus.sentences[0]
        self.assertEqual(other.mentions(), other.gold_mentions())

        buffer = io.StringIO()
        write_gold_entities(corpus, buffer)
        buffer.seek(0)
        self.assertEqual(entities, read_gold_entities(buffer))

    def test_sidecar_rejects_misaligned_mention(self):
        buffer = io.StringIO(u'abs4:0\tPER\t1\t14\t-1\n')
        with self.assertRaises(InvalidCorpus):
            attach_gold_entities(self.gold, read_gold_entities(buffer))

    def test_render_mentions(self):
        sentence = self.gold.sentences[0]
        self.assertEqual(
            '[PER Jan z Kralup] prodal dvůr v [LOC Praze] .',
            render_mentions(sentence.text, sentence.mentions())
        )
