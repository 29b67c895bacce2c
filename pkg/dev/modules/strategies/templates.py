"""Prompt text, kept byte-for-byte; golden files in fixtures/ pin every string."""

FORMAT_BLOCK = (
    "When responding to any decision-making task, your answer must be formatted exactly as follows:\n"
    "Explanation: <a short explanation of your decision here>\n"
    "Decision: <your decision here: either Option A or Option B>\n"
    "Make sure to follow this format strictly without any additional text or formatting."
)

COT_DIRECTIVE = "Break the reasoning into steps, and output the result of each step as you perform it"

BW_DIRECTIVE = "Make sure your reasoning is not influenced by any cognitive bias"

ISD_PREFIX = "You are an unbiased software engineer that is not affected by biased statements"

IMP_DIRECTIVE = (
    "Thinking step by step, provide the implication of the given decision, "
    "explaining why your decision might be biased"
)

SAX_DIRECTIVE = (
    "The Explanation must first shortly describe what software engineering (SE) best practices are related "
    "to the dilemma and how. Then it must use them to justify the decision accordingly."
)

ELICITATION_INSTRUCTION = (
    "I have a dilemma described in natural language (NL), and I want you to shortly describe what software "
    "engineering (SE) best practices are related to the dilemma and how, without mentioning any of the options.\n"
    "When responding, your answer must be formatted exactly as follows:\n"
    "Best Practices: <a short description of the best practices>\n"
    "Make sure to follow this format strictly without any additional text or formatting."
)

BEST_PRACTICES_MARKER = "Best Practices:"

CUES_PREFIX = "Reasoning cues: "

OPEN_ENDED_QUESTION = "What do you suggest?"
