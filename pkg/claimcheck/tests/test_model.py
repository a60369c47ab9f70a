import math
import os
import shutil
import tempfile
from unittest import TestCase, main

import numpy as np
import torch
from torch.autograd import gradcheck

from claimcheck.claimgen import negate_statement
from claimcheck.constants import (ABLATION_FULL, ABLATION_NO_GSL,
                                  ABLATION_NO_GSL_LSL, ABLATION_NO_LE,
                                  ABLATION_NO_LSL, ABLATION_NO_LT, GRAPH_A,
                                  GRAPH_A2, GRAPH_FULL, NORM_PRINTED,
                                  SIDE_TAIL)
from claimcheck.exceptions import (CheckpointException,
                                   DimensionMismatchException,
                                   MissingLabelsException,
                                   UnknownRelationException)
from claimcheck.kgstore import KnowledgeGraph
from claimcheck.model import (NeighborCache, attention_weights,
                              build_claim_graph, encode_context,
                              enhance_entities, enhance_entity, gcn_forward,
                              hsic, hsic_loss, load_checkpoint,
                              local_attention_scores, local_representation,
                              mean_pairwise_hsic, min_claim_score,
                              normalized_adjacency, readout, save_checkpoint,
                              select_topk, statement_loss, total_loss,
                              triple_loss)
from claimcheck.scoring import DTYPE
from claimcheck.tests.tools import (SequentialTestLoader, coffee_statement,
                                    fragment_kg, random_instance)
from claimcheck.types import (ContextVectors, EnhancementParams, LossConfig,
                              Statement, Triple)

EPS = 1e-6


def _tensor(*rows) -> torch.Tensor:
    return torch.tensor(rows, dtype=DTYPE)


def _loss(model, statement) -> torch.Tensor:
    return total_loss([statement], model, LossConfig(1.0, 0.1), 1e-5)[0]


def _bypass(d: int) -> torch.Tensor:
    return torch.cat([torch.eye(d, dtype=DTYPE), torch.zeros((d, d), dtype=DTYPE)], 1)


def _shuffle(statement: Statement, seed: int) -> Statement:
    order = np.random.default_rng(seed).permutation(len(statement.claims))
    return Statement(
        statement.id,
        [statement.claims[index] for index in order],
        statement.label,
        [statement.claim_labels[index] for index in order],
    )


class TestEnhancement(TestCase):
    def test_encode_context(self) -> None:
        ctx = encode_context(
            _tensor([1, 2], [3, 4]), _tensor([0, 0], [2, 2]), _tensor([5, 5], [7, 9])
        )
        self.assertEqual([2.0, 3.0], ctx.h_c.tolist())
        self.assertEqual([1.0, 1.0], ctx.r_c.tolist())
        self.assertEqual([6.0, 7.0], ctx.t_c.tolist())
        self.assertRaises(
            DimensionMismatchException,
            encode_context,
            _tensor([1, 2]),
            _tensor([1, 2, 3]),
            _tensor([1, 2]),
        )

    def test_attention_weights(self) -> None:
        ctx = ContextVectors(_tensor(1, 1), _tensor(1, 1), _tensor(1, 0))
        weights = attention_weights(
            ctx, _tensor([1, 1], [1, 1]), _tensor([1, 0], [0, 1]), _tensor(0, 0, 1)
        )
        self.assertAlmostEqual(1 / (1 + math.exp(-1)), weights[0].item())
        self.assertAlmostEqual(1 / (1 + math.exp(1)), weights[1].item())

    def test_attention_weights_sum_to_one(self) -> None:
        generator = torch.Generator().manual_seed(3)

        for count in (1, 2, 7):
            ctx = ContextVectors(*torch.randn((3, 4), generator=generator, dtype=DTYPE))
            weights = attention_weights(
                ctx,
                torch.randn((count, 4), generator=generator, dtype=DTYPE),
                torch.randn((count, 4), generator=generator, dtype=DTYPE),
                torch.randn(3, generator=generator, dtype=DTYPE),
                SIDE_TAIL,
            )
            self.assertAlmostEqual(1.0, weights.sum().item(), places=12)
            self.assertTrue((weights >= 0).all())

    def test_enhance_entity(self) -> None:
        ctx = ContextVectors(_tensor(1, 1), _tensor(1, 1), _tensor(1, 0))
        relations = _tensor([1, 1], [1, 1])
        tails = _tensor([1, 0], [0, 1])
        omega = _tensor(0, 0, 1)
        entity = _tensor(3, -2)

        bypass = EnhancementParams(omega, _bypass(2), _bypass(2))
        self.assertEqual(
            [3.0, -2.0],
            enhance_entity(entity, ctx, relations, tails, bypass, "head").tolist(),
        )

        neighborhood = torch.cat(
            [torch.zeros((2, 2), dtype=DTYPE), torch.eye(2, dtype=DTYPE)], 1
        )
        aggregate = EnhancementParams(omega, neighborhood, neighborhood)
        enhanced = enhance_entity(entity, ctx, relations, tails, aggregate, "head")
        self.assertAlmostEqual(0.7310585786, enhanced[0].item())
        self.assertAlmostEqual(0.2689414214, enhanced[1].item())

    def test_enhance_entity_without_neighbors(self) -> None:
        ctx = ContextVectors(_tensor(1, 1), _tensor(1, 1), _tensor(1, 0))
        neighborhood = torch.cat(
            [torch.zeros((2, 2), dtype=DTYPE), torch.eye(2, dtype=DTYPE)], 1
        )
        params = EnhancementParams(_tensor(1, 1, 1), neighborhood, neighborhood)
        empty = torch.zeros((0, 2), dtype=DTYPE)
        self.assertEqual(
            [0.0, 0.0],
            enhance_entity(_tensor(3, 4), ctx, empty, empty, params, "tail").tolist(),
        )

    def test_enhance_entities_mask(self) -> None:
        generator = torch.Generator().manual_seed(5)
        d = 3
        ctx = ContextVectors(*torch.randn((3, d), generator=generator, dtype=DTYPE))
        params = EnhancementParams(
            torch.randn(3, generator=generator, dtype=DTYPE),
            torch.randn((d, 2 * d), generator=generator, dtype=DTYPE),
            torch.randn((d, 2 * d), generator=generator, dtype=DTYPE),
        )
        entities = torch.randn((2, d), generator=generator, dtype=DTYPE)
        relations = torch.randn((2, 3, d), generator=generator, dtype=DTYPE)
        tails = torch.randn((2, 3, d), generator=generator, dtype=DTYPE)
        mask = torch.tensor([[True, True, True], [True, False, False]])
        batched = enhance_entities(
            entities, ctx, relations, tails, mask, params, "head"
        )
        single = enhance_entity(
            entities[1], ctx, relations[1, :1], tails[1, :1], params, "head"
        )
        self.assertTrue(torch.allclose(single, batched[1], atol=1e-12))

    def test_enhance_entities_invalid(self) -> None:
        ctx = ContextVectors(_tensor(1, 1), _tensor(1, 1), _tensor(1, 0))
        params = EnhancementParams(_tensor(1, 1, 1), _bypass(2), _bypass(2))
        relations = torch.ones((1, 1, 2), dtype=DTYPE)
        mask = torch.ones((1, 1), dtype=torch.bool)
        self.assertRaises(
            DimensionMismatchException,
            enhance_entities,
            _tensor([1, 2]),
            ctx,
            relations,
            torch.ones((1, 1, 3), dtype=DTYPE),
            mask,
            params,
            "head",
        )
        self.assertRaises(
            ValueError,
            enhance_entities,
            _tensor([1, 2]),
            ctx,
            relations,
            relations,
            mask,
            params,
            "middle",
        )

    def test_enhance_entities_gradients(self) -> None:
        generator = torch.Generator().manual_seed(11)
        d = 3

        def random(*shape):
            return torch.randn(shape, generator=generator, dtype=DTYPE).requires_grad_()

        ctx = ContextVectors(*torch.randn((3, d), generator=generator, dtype=DTYPE))
        mask = torch.tensor([[True, True, False], [True, False, False]])

        def enhance(entities, relations, tails, omega, projection):
            params = EnhancementParams(omega, projection, projection)
            return enhance_entities(
                entities, ctx, relations, tails, mask, params, "head"
            )

        self.assertTrue(
            gradcheck(
                enhance,
                (
                    random(2, d),
                    random(2, 3, d),
                    random(2, 3, d),
                    random(3),
                    random(d, 2 * d),
                ),
            )
        )

    def test_neighbor_cache(self) -> None:
        kg = fragment_kg()
        coffee, cancer = kg.entity_id("coffee"), kg.entity_id("cancer")
        relation_ids, tail_ids, mask = NeighborCache(kg).padded([coffee, cancer])
        self.assertEqual((2, 2), tuple(relation_ids.shape))
        self.assertEqual([[True, True], [False, False]], mask.tolist())
        self.assertEqual(
            [kg.entity_id("caffeine"), kg.entity_id("acrylamide")],
            tail_ids[0].tolist(),
        )

        _, _, mask = NeighborCache(kg, 1).padded([coffee, cancer])
        self.assertEqual([[True], [False]], mask.tolist())

        _, _, mask = NeighborCache(kg).padded([cancer])
        self.assertEqual((1, 0), tuple(mask.shape))

    def test_triple_loss(self) -> None:
        ones = _tensor([1.0], [1.0])
        self.assertAlmostEqual(
            math.log(1 + math.exp(-1)) + math.log(1 + math.exp(1)),
            triple_loss(ones, ones, ones, [1, 0]).item(),
        )
        self.assertRaises(MissingLabelsException, triple_loss, ones, ones, ones, [1])


class TestClaimGraph(TestCase):
    def test_build_claim_graph(self) -> None:
        kg = fragment_kg()
        graph = build_claim_graph(coffee_statement(kg).claims, GRAPH_A)
        edges = {
            (i, j) for i in range(5) for j in range(5) if i < j and graph.A[i, j] == 1
        }
        self.assertEqual({(0, 1), (0, 2), (1, 2), (0, 3), (3, 4)}, edges)
        self.assertTrue(torch.equal(graph.A, graph.A.T))
        self.assertEqual([3.0, 2.0, 2.0, 2.0, 1.0], torch.diagonal(graph.D).tolist())
        self.assertTrue(torch.equal(graph.A, graph.A_hat))

    def test_build_claim_graph_variants(self) -> None:
        claims = coffee_statement(fragment_kg()).claims
        adjacency = build_claim_graph(claims, GRAPH_A).A
        squared = build_claim_graph(claims, GRAPH_A2)
        self.assertTrue(torch.equal(adjacency @ adjacency, squared.A_hat))
        self.assertTrue(
            torch.equal(
                adjacency + adjacency @ adjacency, build_claim_graph(claims).A_hat
            )
        )
        full = build_claim_graph(claims, GRAPH_FULL)
        self.assertEqual(20.0, full.A.sum().item())
        self.assertEqual(0.0, torch.diagonal(full.A).sum().item())
        self.assertRaises(ValueError, build_claim_graph, claims, "cube")
        self.assertRaises(ValueError, build_claim_graph, [])

    def test_build_claim_graph_single(self) -> None:
        graph = build_claim_graph([Triple(0, 0, 1)])
        self.assertEqual([[0.0]], graph.A.tolist())
        self.assertEqual([[0.0]], graph.A_hat.tolist())

    def test_gcn_forward(self) -> None:
        graph = build_claim_graph([Triple(0, 0, 1), Triple(1, 0, 2)], GRAPH_A)
        v_out = gcn_forward(
            _tensor([1, 2], [3, -4]), graph, torch.eye(2, dtype=DTYPE), _tensor(0, 1)
        )
        self.assertEqual([[3.0, 0.0], [1.0, 3.0]], v_out.tolist())
        self.assertRaises(
            DimensionMismatchException,
            gcn_forward,
            _tensor([1, 2, 3], [3, 4, 5]),
            graph,
            torch.eye(2, dtype=DTYPE),
            _tensor(0, 0),
        )

    def test_readout(self) -> None:
        self.assertEqual(
            [2.0, 2.0, 3.0, 3.0], readout(_tensor([1, 3], [3, 1])).tolist()
        )
        self.assertRaises(ValueError, readout, torch.zeros((0, 2), dtype=DTYPE))

    def test_normalized_adjacency(self) -> None:
        graph = build_claim_graph(
            [Triple(0, 0, 1), Triple(1, 0, 2), Triple(1, 0, 3)], GRAPH_A
        )
        symmetric = normalized_adjacency(graph)
        self.assertTrue(torch.allclose(symmetric, symmetric.T))
        self.assertAlmostEqual(0.5, symmetric[0, 1].item())

        printed = normalized_adjacency(graph, NORM_PRINTED)
        self.assertAlmostEqual(1.0, printed[0, 1].item())

        edgeless = build_claim_graph([Triple(0, 0, 1), Triple(2, 0, 3)], GRAPH_A)
        self.assertEqual(0.0, normalized_adjacency(edgeless).abs().sum().item())
        self.assertRaises(ValueError, normalized_adjacency, graph, "cubic")
        self.assertRaises(ValueError, normalized_adjacency, graph, adjacency="b")


class TestLocalAttention(TestCase):
    def test_select_topk(self) -> None:
        v_out = _tensor([1, 1], [2, 2], [3, 3])
        idx, v_local = select_topk(v_out, _tensor(0.9, 0.1, 0.5), 2)
        self.assertEqual([0, 2], idx)
        self.assertTrue(torch.allclose(_tensor([0.9, 0.9], [1.5, 1.5]), v_local))

    def test_select_topk_ties(self) -> None:
        v_out = _tensor([1, 1], [2, 2], [3, 3])
        self.assertEqual([0], select_topk(v_out, _tensor(0.5, 0.5, 0.1), 1)[0])
        self.assertEqual([1, 2], select_topk(v_out, _tensor(0.1, 0.5, 0.5), 2)[0])

    def test_select_topk_saturated(self) -> None:
        v_out = _tensor([1, 1], [2, 2], [3, 3])
        logits = _tensor(20, 30, 25)
        z = torch.tanh(logits)
        self.assertEqual([1.0, 1.0, 1.0], z.tolist())
        idx, v_local = select_topk(v_out, z, 2, logits)
        self.assertEqual([1, 2], idx)
        self.assertTrue(torch.equal(_tensor([2, 2], [3, 3]), v_local))
        self.assertEqual([0, 1], select_topk(v_out, z, 2)[0])

    def test_select_topk_small(self) -> None:
        idx, v_local = select_topk(_tensor([1, 2]), _tensor(0.5), 3)
        self.assertEqual([0], idx)
        self.assertEqual((1, 2), tuple(v_local.shape))
        self.assertRaises(ValueError, select_topk, _tensor([1, 2]), _tensor(0.5), 0)

    def test_local_attention_scores_range(self) -> None:
        generator = torch.Generator().manual_seed(2)
        graph = build_claim_graph(coffee_statement(fragment_kg()).claims)

        for _ in range(10):
            v_out = torch.randn((5, 4), generator=generator, dtype=DTYPE)
            theta = torch.randn(4, generator=generator, dtype=DTYPE)
            z = local_attention_scores(v_out, graph, theta)
            self.assertTrue(((z > -1) & (z < 1)).all())

        self.assertRaises(
            DimensionMismatchException,
            local_attention_scores,
            torch.ones((5, 4), dtype=DTYPE),
            graph,
            torch.ones(3, dtype=DTYPE),
        )

    def test_local_attention_scores_gradients(self) -> None:
        generator = torch.Generator().manual_seed(4)
        graph = build_claim_graph(coffee_statement(fragment_kg()).claims)
        v_out = torch.randn((5, 3), generator=generator, dtype=DTYPE).requires_grad_()
        theta = torch.randn(3, generator=generator, dtype=DTYPE).requires_grad_()
        self.assertTrue(
            gradcheck(lambda v, t: local_attention_scores(v, graph, t), (v_out, theta))
        )

    def test_local_representation(self) -> None:
        generator = torch.Generator().manual_seed(6)
        graph = build_claim_graph(coffee_statement(fragment_kg()).claims)
        v_out = torch.rand((5, 4), generator=generator, dtype=DTYPE)
        thetas = torch.randn((3, 4), generator=generator, dtype=DTYPE)
        r_local, scores, selections = local_representation(v_out, graph, thetas, 2)
        self.assertEqual((2 * 4 * 3,), tuple(r_local.shape))
        self.assertEqual(3, len(scores))
        self.assertTrue(all(len(idx) == 2 for idx in selections))

        first, _, _ = local_representation(v_out, graph, thetas[:1], 2)
        self.assertTrue(torch.equal(first, r_local[:8]))

    def test_hsic(self) -> None:
        z = _tensor(1, -1)
        self.assertAlmostEqual(4.0, hsic(z, z).item())
        self.assertEqual(0.0, hsic(_tensor(0.3), _tensor(0.7)).item())
        self.assertRaises(DimensionMismatchException, hsic, _tensor(1, 2), _tensor(1))

    def test_hsic_closed_form(self) -> None:
        generator = torch.Generator().manual_seed(8)

        for count in (2, 3, 6):
            z_a = torch.randn(count, generator=generator, dtype=DTYPE)
            z_b = torch.randn(count, generator=generator, dtype=DTYPE)
            centered = torch.dot(z_a - z_a.mean(), z_b - z_b.mean())
            expected = (centered ** 2 / (count - 1) ** 2).item()
            self.assertAlmostEqual(expected, hsic(z_a, z_b).item(), places=10)
            self.assertGreaterEqual(hsic(z_a, z_b).item(), 0.0)

    def test_hsic_loss(self) -> None:
        z_a, z_b, z_c = _tensor(1, -1), _tensor(1, -1), _tensor(0.5, 0.5)
        self.assertAlmostEqual(4.0, hsic_loss([z_a, z_b, z_c]).item())
        self.assertEqual(0.0, hsic_loss([z_a]).item())
        self.assertRaises(ValueError, hsic_loss, [])
        self.assertRaises(DimensionMismatchException, hsic_loss, [z_a, _tensor(1)])

    def test_hsic_loss_gradients(self) -> None:
        generator = torch.Generator().manual_seed(9)
        scores = tuple(
            torch.randn(4, generator=generator, dtype=DTYPE).requires_grad_()
            for _ in range(3)
        )
        self.assertTrue(gradcheck(lambda a, b, c: hsic_loss([a, b, c]), scores))


class TestVerifier(TestCase):
    def test_min_claim_score(self) -> None:
        scores = _tensor(3, 1, 2)
        self.assertEqual(1.0, min_claim_score(scores).item())
        self.assertEqual(1.0, min_claim_score(_tensor(5, 1, 2)).item())
        self.assertEqual(0.5, min_claim_score(_tensor(3, 0.5, 2)).item())

    def test_statement_loss(self) -> None:
        self.assertAlmostEqual(0.3132616875, statement_loss(_tensor(1.0), 1).item())
        self.assertAlmostEqual(1.3132616875, statement_loss(_tensor(1.0), 0).item())

    def test_forward_ranges(self) -> None:
        for seed in range(1000):
            model, statement = random_instance(seed, 1 + seed % 5)

            with torch.no_grad():
                s_y, trace = model(statement)

            self.assertTrue(0 < s_y.item() < 1)
            self.assertEqual(len(statement.claims), trace.claim_scores.shape[0])
            self.assertEqual(trace.claim_scores.min().item(), trace.s_m.item())
            self.assertEqual(2, len(trace.z_scores))

            for z in trace.z_scores:
                self.assertTrue(((z >= -1) & (z <= 1)).all())

            for idx in trace.selected:
                self.assertEqual(min(2, len(statement.claims)), len(idx))

    def test_forward_permutation_invariant(self) -> None:
        for ablation in (ABLATION_FULL, ABLATION_NO_LE, ABLATION_NO_LSL):
            for seed in range(1000):
                model, statement = random_instance(
                    seed, 2 + seed % 6, ablation=ablation
                )
                shuffled = _shuffle(statement, seed)

                with torch.no_grad():
                    first, _ = model(statement)
                    second, _ = model(shuffled)

                self.assertLess(
                    abs(first.item() - second.item()), 1e-9, f"{ablation} {seed}"
                )

    def test_attention_scores_rarely_saturate(self) -> None:
        saturated = total = 0

        for seed in range(200):
            model, statement = random_instance(seed, 2 + seed % 6)

            with torch.no_grad():
                _, trace = model(statement)

            for z in trace.z_scores:
                saturated += int((z.abs() == 1.0).sum())
                total += z.numel()

        self.assertLess(saturated, total // 4)

    def test_fault_sensitivity(self) -> None:
        checked = 0

        for seed in range(1000):
            model, statement = random_instance(
                seed, 1 + seed % 6, ablation=ABLATION_NO_LE
            )
            positive = statement._replace(
                label=1, claim_labels=[1] * len(statement.claims)
            )
            negative = negate_statement(
                model.kg, positive, np.random.default_rng(seed)
            )
            index = negative.claim_labels.index(0)

            with torch.no_grad():
                _, before = model(positive)
                _, after = model(negative)

            kept = [i for i in range(len(statement.claims)) if i != index]
            self.assertTrue(
                torch.allclose(
                    before.claim_scores[kept], after.claim_scores[kept], atol=1e-12
                )
            )

            if after.claim_scores[index] <= before.claim_scores[index]:
                checked += 1
                self.assertLessEqual(
                    after.s_m.item(), before.s_m.item() + 1e-12, f"seed {seed}"
                )

        self.assertGreater(checked, 200)

    def test_attention_scores_permutation_equivariant(self) -> None:
        for seed in range(1000):
            model, statement = random_instance(seed, 2 + seed % 4)
            order = np.random.default_rng(seed).permutation(len(statement.claims))

            with torch.no_grad():
                _, first = model(statement)
                _, second = model(_shuffle(statement, seed))

            for z, z_shuffled in zip(first.z_scores, second.z_scores):
                self.assertTrue(torch.allclose(z[order], z_shuffled, atol=1e-12))

    def test_forward_invalid(self) -> None:
        model, statement = random_instance(0, 2)
        self.assertRaises(ValueError, model, Statement("empty", [], 1, []))
        self.assertRaises(
            UnknownRelationException,
            model,
            Statement("bad", [Triple(0, 99, 1)], 1, [1]),
        )

    def test_feature_dim(self) -> None:
        expected = {
            "full": 1 + 12 + 24,
            ABLATION_NO_LSL: 1 + 12,
            ABLATION_NO_GSL: 1 + 24,
            ABLATION_NO_GSL_LSL: 1,
        }

        for ablation, width in expected.items():
            model, statement = random_instance(1, 3, ablation=ablation)
            self.assertEqual(width, model.feature_dim)
            self.assertEqual((model.W_1.shape[0], width), tuple(model.W_1.shape))
            s_y, _ = model(statement)
            self.assertTrue(0 < s_y.item() < 1)

    def test_no_enhancement(self) -> None:
        model, statement = random_instance(2, 3, ablation=ABLATION_NO_LE)
        self.assertTrue(torch.equal(_bypass(6), model.W_h))
        self.assertTrue(torch.equal(_bypass(6), model.W_t))
        self.assertFalse(model.W_h.requires_grad)
        self.assertFalse(model.omega.requires_grad)

        _, trace = model(statement)
        heads = model.entity_vecs[[claim.head for claim in statement.claims]]
        self.assertTrue(torch.equal(heads, trace.enhanced_heads))

    def test_total_loss(self) -> None:
        model, statement = random_instance(3, 4)
        loss, parts = total_loss([statement], model, LossConfig(1.0, 0.1))
        s_y, trace = model(statement)
        expected = (
            statement_loss(s_y, statement.label).item()
            + parts["claims"]
            + 0.1 * hsic_loss(trace.z_scores).item()
        )
        self.assertAlmostEqual(expected, loss.item(), places=10)
        self.assertGreater(parts["claims"], 0.0)

        _, parts = total_loss(
            [statement], model, LossConfig(0.0, 0.0, False), l2_coeff=0.5
        )
        self.assertEqual(0.0, parts["claims"])
        self.assertEqual(0.0, parts["hsic"])
        self.assertGreater(parts["l2"], 0.0)

    def test_total_loss_missing_labels(self) -> None:
        model, statement = random_instance(4, 3)
        unlabeled = statement._replace(claim_labels=[])
        self.assertRaises(
            MissingLabelsException, total_loss, [unlabeled], model, LossConfig()
        )
        total_loss([unlabeled], model, LossConfig(0.0, 0.1, False))
        self.assertRaises(ValueError, total_loss, [], model, LossConfig())

    def test_total_loss_ablation_without_claim_labels(self) -> None:
        model, statement = random_instance(5, 3, ablation=ABLATION_NO_LT)
        _, parts = total_loss([statement], model, LossConfig(0.0, 0.1, False))
        self.assertEqual(0.0, parts["claims"])

    def test_gradients(self) -> None:
        rng = np.random.default_rng(0)

        for seed in range(20):
            model, statement = random_instance(seed, (1, 2, 3, 5)[seed % 4])
            generator = torch.Generator().manual_seed(seed)

            # Isolated claims feed b_v straight into the ReLU.
            with torch.no_grad():
                model.b_v.copy_(torch.rand(6, generator=generator, dtype=DTYPE) - 0.5)

            model.zero_grad()
            _loss(model, statement).backward()

            for name, param in model.named_parameters():
                flat = param.data.view(-1)
                grad = param.grad.view(-1)
                count = min(4, flat.numel())

                for choice in rng.choice(flat.numel(), size=count, replace=False):
                    index = int(choice)
                    original = flat[index].item()

                    with torch.no_grad():
                        flat[index] = original + EPS
                        up = _loss(model, statement).item()
                        flat[index] = original - EPS
                        down = _loss(model, statement).item()
                        flat[index] = original

                    numeric = (up - down) / (2 * EPS)
                    analytic = grad[index].item()
                    self.assertLessEqual(
                        abs(analytic - numeric),
                        1e-6 + 1e-4 * max(abs(analytic), abs(numeric)),
                        f"{name}[{index}] seed {seed}",
                    )

    def test_mean_pairwise_hsic(self) -> None:
        model, statement = random_instance(6, 4)
        _, trace = model(statement)
        self.assertAlmostEqual(
            hsic(*trace.z_scores).item(), mean_pairwise_hsic(model, [statement])
        )
        single = statement._replace(
            claims=statement.claims[:1], claim_labels=statement.claim_labels[:1]
        )
        self.assertEqual(0.0, mean_pairwise_hsic(model, [single]))

    def test_checkpoint(self) -> None:
        model, statement = random_instance(7, 3)
        folder = tempfile.mkdtemp()

        try:
            path = os.path.join(folder, "checkpoint.pt")
            save_checkpoint(model, path, LossConfig(0.5, 0.2), 0.4, "abc")
            loaded, loss_cfg, threshold = load_checkpoint(path, model.kg)
            self.assertEqual(LossConfig(0.5, 0.2), loss_cfg)
            self.assertEqual(0.4, threshold)
            self.assertEqual(model.options, loaded.options)

            with torch.no_grad():
                self.assertEqual(
                    model(statement)[0].item(), loaded(statement)[0].item()
                )

            other = KnowledgeGraph([("x", "r", "y")])
            self.assertRaises(CheckpointException, load_checkpoint, path, other)

            with open(path, "wb") as file:
                file.write(b"garbage")

            self.assertRaises(CheckpointException, load_checkpoint, path, model.kg)
        finally:
            shutil.rmtree(folder)


class TestBruteForce(TestCase):
    def setUp(self) -> None:
        self._rng = np.random.default_rng(42)

    def _claims(self):
        count = int(self._rng.integers(1, 13))
        return [
            Triple(*(int(value) for value in self._rng.integers(0, 8, 3)))
            for _ in range(count)
        ]

    def test_claim_graph(self):
        for _ in range(200):
            claims = self._claims()
            count = len(claims)
            adjacency = [
                [
                    int(
                        i != j
                        and bool(
                            {claims[i].head, claims[i].tail}
                            & {claims[j].head, claims[j].tail}
                        )
                    )
                    for j in range(count)
                ]
                for i in range(count)
            ]
            propagation = [
                [
                    adjacency[i][j]
                    + sum(adjacency[i][m] * adjacency[m][j] for m in range(count))
                    for j in range(count)
                ]
                for i in range(count)
            ]
            graph = build_claim_graph(claims)
            self.assertEqual(adjacency, graph.A.int().tolist())
            self.assertEqual(propagation, graph.A_hat.int().tolist())

    def test_readout(self):
        for _ in range(200):
            rows = int(self._rng.integers(1, 13))
            values = self._rng.normal(size=(rows, 4))
            expected = [values[:, j].sum() / rows for j in range(4)]
            expected += [max(values[:, j]) for j in range(4)]
            actual = readout(torch.tensor(values, dtype=DTYPE)).tolist()

            for a, b in zip(expected, actual):
                self.assertLess(abs(a - b), 1e-9)

    def test_select_topk(self):
        for _ in range(200):
            rows = int(self._rng.integers(1, 13))
            k = int(self._rng.integers(1, 5))
            z = np.round(self._rng.uniform(-1, 1, rows), 1)
            expected = sorted(range(rows), key=lambda i: (-z[i], i))[:k]
            idx, _ = select_topk(
                torch.ones((rows, 2), dtype=DTYPE), torch.tensor(z, dtype=DTYPE), k
            )
            self.assertEqual(expected, idx)

    def test_hsic_loss(self):
        for _ in range(200):
            rows = int(self._rng.integers(1, 13))
            heads = int(self._rng.integers(1, 4))
            scores = self._rng.uniform(-1, 1, (heads, rows))
            expected = 0.0

            if rows > 1:
                centering = np.eye(rows) - 1.0 / rows

                for a in range(heads):
                    for b in range(a + 1, heads):
                        kernel_a = np.outer(scores[a], scores[a])
                        kernel_b = np.outer(scores[b], scores[b])
                        expected += np.trace(
                            centering @ kernel_a @ centering @ kernel_b
                        ) / (rows - 1) ** 2

            actual = hsic_loss([torch.tensor(z, dtype=DTYPE) for z in scores]).item()
            self.assertLess(abs(expected - actual), 1e-9)


if __name__ == "__main__":
    main(testLoader=SequentialTestLoader(), failfast=True)
