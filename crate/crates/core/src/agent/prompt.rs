//! System prompt and the task prompt templates handed to the model.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::AgentError;

const SYSTEM_PROMPT: &str = r#"You are an assistant whose job is to help fire scientists navigate and summarize the source code, modify the simulation case configuration files, and run simulation jobs.
Respond to the human scientist as helpfully and accurately as possible.
You have access to the following tools: {tool_names}.
Use a JSON blob to specify a tool by providing an action key (tool name) and an action_input key (tool input).
Valid "action" values: "Final Answer" or {tool_names}.
Provide only ONE action per $JSON_BLOB, as shown:

```
{
"action": $TOOL_NAME,
"action_input": $INPUT
}
```

Follow this format:

Question: input question to answer
Thought: consider previous and subsequent steps
while requests is not finished, do
    Action:
    ```
    $JSON_BLOB
    ```
    Observation: action result
end

After the problem is solved, give a final thought to summarize."#;

const CASE_CONFIG: &str = "I have a FireFOAM simulation case located at {case_path}.
{user_request}
Always read the contents of a file before modifying it. I have compressed the entire case directory, including the README file, into a single long string for you to view and understand my request, as follows:
{case_contents}";

const SERIAL_JOB: &str = "I have a FireFOAM simulation case located at {case_path}. Take a look at the case directory. Mesh the case using the provided script, and then run the simulation in serial on the command line by invoking fireFoam. Write the output to a log file. After the simulation is finished, plot the results of volumetric heat release rate and save them in the case directory. Remember to load environment variables from {OF_bashrc_path}.";

const HPC_JOB: &str = "I have a FireFOAM simulation case located at {case_path}. Determine what SLURM queues you have access to. Mesh the case using the provided script. Based on the mesh size and the resources you have available, choose how many nodes to use. Use all physical cores on each node you use. Configure the number of subdomains in the case based on the number of physical cores and decompose the domain. Prepare a SLURM script for the queue and core count, then submit the job. Remember to always load environment variables from {OF_bashrc_path} before any FOAM command, both in the command line and in the SLURM script. Always read the contents of a file before modifying it. I have compressed the entire case directory, including the README file, into a single long string for you to view and understand my request, as follows:
{case_contents}";

/// Render the system prompt advertising `tool_names`.
pub fn render_system_prompt<S: AsRef<str>>(tool_names: &[S]) -> Result<String, AgentError> {
    if tool_names.is_empty() {
        return Err(AgentError::EmptyToolList);
    }
    let mut seen = HashSet::new();
    for name in tool_names {
        if !seen.insert(name.as_ref()) {
            return Err(AgentError::DuplicateToolName(name.as_ref().to_string()));
        }
    }
    let joined = tool_names
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(", ");
    Ok(SYSTEM_PROMPT.replace("{tool_names}", &joined))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTemplate {
    CaseConfig,
    SerialJob,
    HpcJob,
}

impl PromptTemplate {
    fn text(self) -> &'static str {
        match self {
            PromptTemplate::CaseConfig => CASE_CONFIG,
            PromptTemplate::SerialJob => SERIAL_JOB,
            PromptTemplate::HpcJob => HPC_JOB,
        }
    }

    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            PromptTemplate::CaseConfig => &["case_path", "user_request", "case_contents"],
            PromptTemplate::SerialJob => &["case_path", "OF_bashrc_path"],
            PromptTemplate::HpcJob => &["case_path", "OF_bashrc_path", "case_contents"],
        }
    }
}

/// Substitute every placeholder of `template` in a single pass, so braces
/// inside bound values (dictionary files are full of them) are left alone.
pub fn render_prompt_template(
    template: PromptTemplate,
    bindings: &HashMap<&str, &str>,
) -> Result<String, AgentError> {
    let names = template.placeholders();
    for name in names {
        if !bindings.contains_key(name) {
            return Err(AgentError::MissingBinding(name.to_string()));
        }
    }

    let text = template.text();
    let mut out = String::with_capacity(text.len() + bindings.values().map(|v| v.len()).sum::<usize>());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let placeholder = after
            .find('}')
            .map(|close| &after[..close])
            .filter(|name| names.contains(name));
        match placeholder {
            Some(name) => {
                out.push_str(bindings[name]);
                rest = &after[name.len() + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_prompt_lists_tools_twice() {
        let p = render_system_prompt(&["shell", "script", "retrieve"]).unwrap();
        assert!(p.contains(r#"Valid "action" values: "Final Answer" or shell, script, retrieve"#));
        assert!(p.contains("following tools: shell, script, retrieve."));
        for needle in ["Final Answer", "\"action\"", "action_input", "Question:", "Thought:", "Action:", "Observation:"] {
            assert!(p.contains(needle), "missing {needle}");
        }
        assert!(!p.contains("{tool_names}"));
    }

    #[test]
    fn single_tool_in_both_slots() {
        let p = render_system_prompt(&["shell"]).unwrap();
        assert_eq!(p.matches("shell").count(), 2);
    }

    #[test]
    fn ordering_is_the_only_difference() {
        let a = render_system_prompt(&["retrieve", "shell"]).unwrap();
        let b = render_system_prompt(&["shell", "retrieve"]).unwrap();
        assert_ne!(a, b);
        // line-level diff: only the two lines carrying the names differ
        let differing: Vec<_> = a.lines().zip(b.lines()).filter(|(x, y)| x != y).collect();
        assert_eq!(differing.len(), 2);
        for (x, y) in differing {
            assert_eq!(x.replace("retrieve, shell", "shell, retrieve"), y);
        }
    }

    #[test]
    fn empty_and_duplicate_lists_rejected() {
        let empty: [&str; 0] = [];
        assert!(matches!(render_system_prompt(&empty), Err(AgentError::EmptyToolList)));
        assert!(matches!(
            render_system_prompt(&["shell", "shell"]),
            Err(AgentError::DuplicateToolName(_))
        ));
    }

    #[test]
    fn case_config_binds_all_slots() {
        let bindings = HashMap::from([("case_path", "/c"), ("user_request", "double burner"), ("case_contents", "X")]);
        let p = render_prompt_template(PromptTemplate::CaseConfig, &bindings).unwrap();
        assert!(p.contains("located at /c"));
        assert!(p.contains("double burner"));
        assert!(p.contains("Always read the contents of a file before modifying it."));
        assert!(p.ends_with('X'));
    }

    #[test]
    fn serial_without_bashrc_is_missing_binding() {
        let bindings = HashMap::from([("case_path", "/c")]);
        match render_prompt_template(PromptTemplate::SerialJob, &bindings) {
            Err(AgentError::MissingBinding(name)) => assert_eq!(name, "OF_bashrc_path"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hpc_prompt_fully_bound() {
        let bindings = HashMap::from([
            ("case_path", "/c"),
            ("OF_bashrc_path", "/opt/of/bashrc"),
            ("case_contents", "a { b {c}; }"),
        ]);
        let p = render_prompt_template(PromptTemplate::HpcJob, &bindings).unwrap();
        assert!(p.contains("Determine what SLURM queues you have access to."));
        assert!(p.contains("from /opt/of/bashrc before any FOAM command"));
        // braces in the bound contents are not mistaken for placeholders
        assert!(p.ends_with("a { b {c}; }"));
        for name in PromptTemplate::HpcJob.placeholders() {
            assert!(!p.contains(&format!("{{{name}}}")));
        }
    }
}
