"""Asking a language model whether a paper builds on a theory or a method.

A local mock endpoint stands in for a chat-completions server. The client
reads the probability of each option from the first answer token, batches
requests with bounded concurrency, and resumes from a journal after an
interruption without re-sending finished work.
"""

import math
import tempfile
from pathlib import Path

from displace.llm import ClassificationRequest, build_prompt, classify_batch, classify_pair
from displace.mock_endpoint import MockEndpoint, fixed_logprobs, prompt_keyed

req = ClassificationRequest(
    "Molecular structure of nucleic acids",
    "We wish to suggest a structure for the salt of deoxyribose nucleic acid.",
    "The structure of proteins",
    "Two hydrogen-bonded helical configurations for the polypeptide chain.",
)
print(build_prompt(req), "\n")

with MockEndpoint(fixed_logprobs({"1": math.log(0.86), "2": math.log(0.14)})) as ep:
    res = classify_pair(ep.url, "mock-model", req)
print(f"p(theory) = {res.p_theory:.2f}, p(method) = {res.p_method:.2f}, chosen option {res.chosen_option}")

requests = [ClassificationRequest(f"Study no. {i}", "abstract", f"Reference {i}", "abstract", key=f"pair{i}") for i in range(8)]
responder = prompt_keyed(lambda prompt: (0.1 * int(prompt.split("Study no. ")[1][0]) + 0.1, 0.01))
with tempfile.TemporaryDirectory() as tmp:
    journal = Path(tmp) / "journal.jsonl"
    with MockEndpoint(responder) as ep:
        run = classify_batch(ep.url, "mock-model", requests, max_in_flight=3, journal=journal)
        done = [next(run) for _ in range(3)]
        run.close()
        print(f"\ninterrupted after {len(done)} results")
        n_sent = len(ep.requests)
        rest = list(classify_batch(ep.url, "mock-model", requests, max_in_flight=3, journal=journal))
        print(f"resumed: {len(ep.requests) - n_sent} new requests sent for {len(rest)} results")
    for item in rest:
        print(f"  {item.key}: p(theory) = {item.result.p_theory:.2f}")
