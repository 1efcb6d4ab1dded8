/// Shell-style project pattern: `*` matches any run of characters, `?` one
/// character, everything else literally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectGlob(String);

impl ProjectGlob {
    pub fn new(pattern: impl Into<String>) -> Self {
        ProjectGlob(pattern.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn matches(&self, project: &str) -> bool {
        let p: Vec<char> = self.0.chars().collect();
        let s: Vec<char> = project.chars().collect();
        let (mut pi, mut si) = (0, 0);
        let mut backtrack: Option<(usize, usize)> = None;
        while si < s.len() {
            match p.get(pi) {
                Some('*') => {
                    backtrack = Some((pi, si));
                    pi += 1;
                }
                Some('?') => {
                    pi += 1;
                    si += 1;
                }
                Some(&c) if c == s[si] => {
                    pi += 1;
                    si += 1;
                }
                _ => match backtrack {
                    Some((bp, bs)) => {
                        pi = bp + 1;
                        si = bs + 1;
                        backtrack = Some((bp, bs + 1));
                    }
                    None => return false,
                },
            }
        }
        p[pi..].iter().all(|&c| c == '*')
    }
}
